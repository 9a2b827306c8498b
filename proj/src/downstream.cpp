#include "eaaslab/downstream.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eaaslab/digest.hpp"

namespace eaaslab {

using nlohmann::json;

FeatureBatch extract_features(const FeatureExtractor& src, const ImageSet& dataset, int chunk) {
  if (dataset.empty()) throw PreconditionError("extract_features: empty dataset");
  if (!src.direct && !src.api) throw PreconditionError("extract_features: no source");

  FeatureBatch out;
  out.source = src.api ? FeatureSource::eaas : FeatureSource::direct;
  const int dim = src.api ? src.api->feature_dim() : src.direct->feature_dim();
  out.vectors.resize(static_cast<Eigen::Index>(dataset.size()), dim);

  for (size_t off = 0; off < dataset.size(); off += static_cast<size_t>(chunk)) {
    const size_t end = std::min(dataset.size(), off + static_cast<size_t>(chunk));
    std::vector<const std::vector<float>*> batch;
    for (size_t i = off; i < end; ++i) batch.push_back(&dataset.images[i]);
    FeatureBatch fb;
    if (src.api) {
      try {
        fb = src.api->embed(batch);
      } catch (QuotaError& e) {
        e.completed = static_cast<long long>(off);  // rows extracted so far
        throw;
      }
      out.defense_applied = fb.defense_applied;
    } else {
      fb.vectors = src.direct->encode_act(src.direct->to_act(batch));
    }
    for (size_t i = off; i < end; ++i)
      out.vectors.row(static_cast<Eigen::Index>(i)) =
          fb.vectors.row(static_cast<Eigen::Index>(i - off));
  }
  return out;
}

std::string ClassifierConfig::describe() const {
  std::ostringstream os;
  os << "hidden=";
  for (size_t i = 0; i < hidden.size(); ++i) os << (i ? "x" : "") << hidden[i];
  os << ";epochs=" << epochs << ";lr=" << lr << ";batch=" << batch_size << ";seed=" << seed;
  return os.str();
}

std::vector<int> Classifier::predict(const MatF& features) const {
  nn::Act<float> x{features, nn::Shape3{1, 1, static_cast<int>(features.cols())}};
  MatF logits = net.eval_forward(x).m;
  std::vector<int> out(static_cast<size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best;
    logits.row(i).maxCoeff(&best);  // first maximum wins ties
    out[static_cast<size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

namespace {

// softmax cross-entropy over logits; returns mean loss, fills dlogits
float softmax_ce(const MatF& logits, const std::vector<int>& labels, int offset, MatF* dlogits) {
  const Eigen::Index b = logits.rows();
  float loss = 0;
  if (dlogits) dlogits->resize(b, logits.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    const float mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXf e = (logits.row(i).array() - mx).exp();
    const float z = e.sum();
    const int y = labels[static_cast<size_t>(offset + i)];
    loss += std::log(z) - (logits(i, y) - mx);
    if (dlogits) {
      dlogits->row(i) = e / z;
      (*dlogits)(i, y) -= 1.0f;
      dlogits->row(i) /= static_cast<float>(b);
    }
  }
  return loss / static_cast<float>(b);
}

}  // namespace

Classifier train_classifier(const MatF& features, const std::vector<int>& labels,
                            int num_classes, const ClassifierConfig& cfg) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw PreconditionError("train_classifier: features/labels length mismatch");
  if (features.rows() == 0) throw PreconditionError("train_classifier: empty training set");
  std::set<int> present(labels.begin(), labels.end());
  if (static_cast<int>(present.size()) < 2)
    throw PreconditionError("train_classifier: need at least two classes present");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw PreconditionError("train_classifier: label out of range");

  const int dim = static_cast<int>(features.cols());
  Classifier cls;
  cls.num_classes = num_classes;
  cls.net.set_input_shape(nn::Shape3{1, 1, dim});
  int in = dim;
  for (int hsize : cfg.hidden) {
    cls.net.add(std::make_unique<nn::Dense<float>>(in, hsize));
    cls.net.add(std::make_unique<nn::ReLU<float>>());
    in = hsize;
  }
  cls.net.add(std::make_unique<nn::Dense<float>>(in, num_classes, 1.0));
  cls.net.init(splitmix64(cfg.seed ^ 0x636c7366ull));

  nn::Adam<float> opt(cfg.lr);
  std::vector<nn::Param<float>*> params = cls.net.params();

  const Eigen::Index n = features.rows();
  std::vector<int> order(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = named_rng(cfg.seed, "downstream-shuffle", static_cast<uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.index(i));
      std::swap(order[i - 1], order[j]);
    }
    long long correct = 0;
    for (Eigen::Index off = 0; off < n; off += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - off);
      MatF xb(b, dim);
      std::vector<int> yb(static_cast<size_t>(b));
      for (Eigen::Index i = 0; i < b; ++i) {
        xb.row(i) = features.row(order[static_cast<size_t>(off + i)]);
        yb[static_cast<size_t>(i)] = labels[static_cast<size_t>(order[static_cast<size_t>(off + i)])];
      }
      nn::Act<float> xact{xb, nn::Shape3{1, 1, dim}};
      const nn::Act<float>& logits = cls.net.train_forward(xact);
      MatF dlogits;
      const float loss = softmax_ce(logits.m, yb, 0, &dlogits);
      if (!std::isfinite(loss))
        throw DivergenceError("classifier training diverged at epoch " + std::to_string(epoch));
      for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::Index best;
        logits.m.row(i).maxCoeff(&best);
        if (static_cast<int>(best) == yb[static_cast<size_t>(i)]) ++correct;
      }
      cls.net.zero_grad();
      nn::Act<float> dact{dlogits, logits.sh};
      cls.net.backward(dact);
      opt.step(params);
    }
    cls.train_accuracy_curve.push_back(static_cast<double>(correct) / static_cast<double>(n));
  }
  cls.net.drop_caches();
  return cls;
}

double evaluate(const Classifier& cls, const MatF& features, const std::vector<int>& labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()) || labels.empty())
    throw PreconditionError("evaluate: features/labels mismatch or empty");
  std::vector<int> pred = cls.predict(features);
  long long correct = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate_task(const Classifier& cls, const FeatureExtractor& src, const ImageSet& test) {
  if (!test.labels) throw PreconditionError("evaluate: test set is unlabeled");
  FeatureBatch fb = extract_features(src, test);
  return evaluate(cls, fb.vectors, *test.labels);
}

// ---------------------------------------------------------------------------

static json report_to_json(const EvalReport& r) {
  json j;
  j["schema_version"] = r.schema_version;
  j["manifest_digest"] = r.manifest_digest;
  j["attack"] = {{"desc", r.attack_desc},
                 {"variant", r.variant},
                 {"lambda", r.lambda},
                 {"metric", r.metric},
                 {"queries", r.queries_attack},
                 {"cost_dollars", r.cost_dollars},
                 {"surrogate_size", r.surrogate_size}};
  j["defense"] = r.defense_desc;
  json tasks = json::object();
  for (const auto& t : r.tasks) {
    json tj;
    tj["ta"] = t.ta;
    tj["sa"] = t.sa;
    if (auto ratio = t.ratio()) {
      tj["ratio"] = *ratio;
      tj["ratio_pct"] = *t.ratio_pct();
    } else {
      tj["ratio"] = nullptr;
      tj["ratio_pct"] = "undefined";
    }
    tj["queries_downstream"] = t.queries_downstream;
    tasks[t.task] = tj;
  }
  j["tasks"] = tasks;
  return j;
}

std::string EvalReport::to_json() const { return report_to_json(*this).dump(2); }

EvalReport EvalReport::from_json(const std::string& s) {
  json j = json::parse(s);
  EvalReport r;
  r.schema_version = j.at("schema_version").get<int>();
  r.manifest_digest = j.at("manifest_digest").get<std::string>();
  const auto& a = j.at("attack");
  r.attack_desc = a.at("desc").get<std::string>();
  r.variant = a.at("variant").get<std::string>();
  r.lambda = a.at("lambda").get<double>();
  r.metric = a.at("metric").get<std::string>();
  r.queries_attack = a.at("queries").get<long long>();
  r.cost_dollars = a.at("cost_dollars").get<double>();
  r.surrogate_size = a.at("surrogate_size").get<long long>();
  r.defense_desc = j.at("defense").get<std::string>();
  for (auto& [name, tj] : j.at("tasks").items()) {
    TaskResult t;
    t.task = name;
    t.ta = tj.at("ta").get<double>();
    t.sa = tj.at("sa").get<double>();
    t.queries_downstream = tj.at("queries_downstream").get<long long>();
    r.tasks.push_back(t);
  }
  return r;
}

std::string EvalReport::digest() const { return sha256_hex(to_json()); }

double EvalReport::mean_sa() const {
  if (tasks.empty()) return 0;
  double s = 0;
  for (const auto& t : tasks) s += t.sa;
  return s / static_cast<double>(tasks.size());
}

double EvalReport::mean_ta() const {
  if (tasks.empty()) return 0;
  double s = 0;
  for (const auto& t : tasks) s += t.ta;
  return s / static_cast<double>(tasks.size());
}

void write_report(const EvalReport& r, const std::filesystem::path& json_path) {
  std::filesystem::create_directories(json_path.parent_path());
  std::filesystem::path tmp = json_path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp);
    f << r.to_json() << "\n";
    if (!f) throw LoadError("cannot write report: " + json_path.string());
  }
  std::filesystem::rename(tmp, json_path);
}

EvalReport read_report(const std::filesystem::path& json_path) {
  std::ifstream f(json_path);
  if (!f) throw LoadError("cannot read report: " + json_path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return EvalReport::from_json(ss.str());
}

void write_comparison_csv(const std::vector<EvalReport>& reports,
                          const std::filesystem::path& csv_path) {
  std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream f(csv_path);
  f << "variant,defense,lambda,metric,task,ta,sa,ratio_pct,queries,cost_dollars\n";
  for (const auto& r : reports) {
    for (const auto& t : r.tasks) {
      f << r.variant << "," << r.defense_desc << "," << r.lambda << "," << r.metric << ","
        << t.task << "," << t.ta << "," << t.sa << ",";
      if (auto rp = t.ratio_pct())
        f << *rp;
      else
        f << "undefined";
      f << "," << r.queries_attack << "," << r.cost_dollars << "\n";
    }
  }
  if (!f) throw LoadError("cannot write comparison csv: " + csv_path.string());
}

}  // namespace eaaslab
