#include "evfuse/json_io.hpp"

#include <fstream>

#include "evfuse/error.hpp"

namespace evfuse::io {
namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(std::string("missing JSON field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad JSON field '") + key + "': " + e.what());
  }
}

const char* policy_name(net::BaseRatePolicy p) {
  return p == net::BaseRatePolicy::kUniform ? "uniform" : "train";
}

net::BaseRatePolicy policy_from_name(const std::string& name) {
  if (name == "uniform") return net::BaseRatePolicy::kUniform;
  if (name == "train") return net::BaseRatePolicy::kTrainFrequencies;
  throw ValidationError("unknown base-rate policy '" + name + "'");
}

}  // namespace

net::HeadKind head_kind_from_name(const std::string& name) {
  if (name == "dense") return net::HeadKind::kDense;
  if (name == "rbf") return net::HeadKind::kRbf;
  throw ValidationError("unknown head kind '" + name + "' (expected dense or rbf)");
}

json to_json(const Opinion& opinion) {
  return json{{"beliefs", std::vector<double>(opinion.beliefs().begin(), opinion.beliefs().end())},
              {"uncertainty", opinion.uncertainty()}};
}

Opinion opinion_from_json(const json& j) {
  return Opinion(field<std::vector<double>>(j, "beliefs"), field<double>(j, "uncertainty"));
}

json to_json(const BaseRate& base_rate) {
  return json{{"rates", std::vector<double>(base_rate.rates().begin(), base_rate.rates().end())},
              {"weight", base_rate.weight()}};
}

BaseRate base_rate_from_json(const json& j) {
  return BaseRate(field<std::vector<double>>(j, "rates"), field<double>(j, "weight"));
}

json to_json(const net::ModelConfig& cfg) {
  return json{{"num_classes", cfg.num_classes},
              {"view_dims", cfg.view_dims},
              {"weight", cfg.resolved_weight()},
              {"hidden", cfg.hidden},
              {"head", cfg.head == net::HeadKind::kRbf ? "rbf" : "dense"},
              {"standardize_inputs", cfg.standardize_inputs},
              {"learning_rate", cfg.learning_rate},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"annealing_epochs", cfg.resolved_annealing_epochs()},
              {"seed", cfg.seed},
              {"base_rate_policy", policy_name(cfg.base_rate_policy)}};
}

net::ModelConfig model_config_from_json(const json& j) {
  net::ModelConfig cfg;
  cfg.num_classes = field<std::size_t>(j, "num_classes");
  cfg.view_dims = field<std::vector<std::size_t>>(j, "view_dims");
  cfg.weight = field<double>(j, "weight");
  cfg.hidden = field<std::vector<std::size_t>>(j, "hidden");
  if (j.contains("head")) cfg.head = head_kind_from_name(field<std::string>(j, "head"));
  if (j.contains("standardize_inputs")) {
    cfg.standardize_inputs = field<bool>(j, "standardize_inputs");
  }
  cfg.learning_rate = field<double>(j, "learning_rate");
  cfg.epochs = field<std::size_t>(j, "epochs");
  cfg.batch_size = field<std::size_t>(j, "batch_size");
  cfg.annealing_epochs = field<std::size_t>(j, "annealing_epochs");
  cfg.seed = field<std::uint64_t>(j, "seed");
  cfg.base_rate_policy = policy_from_name(field<std::string>(j, "base_rate_policy"));
  cfg.validate();
  return cfg;
}

json to_json(const net::EvidentialModel& model) {
  json heads = json::array();
  for (const auto& head : model.heads()) {
    json layers = json::array();
    for (const auto& l : head.layers()) {
      layers.push_back(
          json{{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
    }
    json h{{"layers", std::move(layers)}};
    if (head.rbf()) {
      h["rbf"] = json{{"in", head.rbf()->in},
                      {"units", head.rbf()->units},
                      {"centers", head.rbf()->centers}};
    }
    if (!head.scaling().identity()) {
      h["scaling"] = json{{"shift", head.scaling().shift}, {"scale", head.scaling().scale}};
    }
    heads.push_back(std::move(h));
  }
  return json{{"format", "evfuse-model"},
              {"version", kCheckpointVersion},
              {"config", to_json(model.config())},
              {"base_rate", to_json(model.base_rate())},
              {"heads", std::move(heads)}};
}

net::EvidentialModel model_from_json(const json& j) {
  if (field<std::string>(j, "format") != "evfuse-model") {
    throw ValidationError("not an evfuse model checkpoint");
  }
  const int version = field<int>(j, "version");
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  net::ModelConfig cfg = model_config_from_json(field<json>(j, "config"));
  BaseRate rate = base_rate_from_json(field<json>(j, "base_rate"));
  std::vector<net::EvidenceHead> heads;
  for (const auto& h : field<json>(j, "heads")) {
    std::vector<net::DenseLayer> layers;
    for (const auto& l : field<json>(h, "layers")) {
      layers.push_back(net::DenseLayer{field<std::size_t>(l, "in"), field<std::size_t>(l, "out"),
                                       field<std::vector<double>>(l, "weights"),
                                       field<std::vector<double>>(l, "bias")});
    }
    std::optional<net::RbfLayer> rbf;
    if (h.contains("rbf")) {
      const json& r = h.at("rbf");
      rbf = net::RbfLayer{field<std::size_t>(r, "in"), field<std::size_t>(r, "units"),
                          field<std::vector<double>>(r, "centers")};
    }
    net::InputScaling scaling;
    if (h.contains("scaling")) {
      const json& sc = h.at("scaling");
      scaling = net::InputScaling{field<std::vector<double>>(sc, "shift"),
                                  field<std::vector<double>>(sc, "scale")};
    }
    heads.emplace_back(std::move(layers), std::move(rbf), std::move(scaling));
  }
  return net::EvidentialModel(std::move(cfg), std::move(rate), std::move(heads));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_model(const net::EvidentialModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(model).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

net::EvidentialModel load_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

json to_json(const net::TrainingReport& report) {
  json epochs = json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back(json{{"epoch", e.epoch},
                          {"lambda", e.lambda},
                          {"train_loss", e.train_loss},
                          {"train_acc", e.train_accuracy},
                          {"valid_loss", e.valid_loss},
                          {"valid_acc", e.valid_accuracy},
                          {"skipped", e.skipped}});
  }
  return json{{"epochs", std::move(epochs)}};
}

json metrics_report(std::span<const metrics::EvalRecord> records,
                    std::span<const double> positive_scores, std::size_t num_classes,
                    std::size_t num_bins) {
  json bins = json::array();
  for (const auto& b : metrics::calibration_bins(records, num_bins)) {
    bins.push_back(json{{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"acc", b.accuracy},
                        {"conf", b.confidence}});
  }
  json auc = nullptr;
  if (num_classes == 2) {
    std::vector<std::size_t> labels;
    for (const auto& r : records) labels.push_back(r.label);
    try {
      auc = metrics::auc_binary(positive_scores, labels);
    } catch (const ValidationError&) {
      auc = nullptr;  // single-class evaluation set
    }
  }
  return json{{"acc", metrics::accuracy(records)},
              {"auc", auc},
              {"ece", metrics::ece(records, num_bins)},
              {"n", records.size()},
              {"bins", std::move(bins)}};
}

}  // namespace evfuse::io
