#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "evfuse/data.hpp"
#include "evfuse/dirichlet.hpp"
#include "evfuse/error.hpp"
#include "evfuse/evidential_net.hpp"
#include "evfuse/json_io.hpp"
#include "evfuse/metrics.hpp"
#include "evfuse/subjective_logic.hpp"

namespace evfuse::cli {
namespace {

using io::json;
namespace fs = std::filesystem;

// --config files are JSON objects: keys name options of the top-level app,
// nested objects keyed by a subcommand name hold that subcommand's options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return dump(app, default_also).dump();
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config file: " + std::string(e.what()));
    }
    if (!j.is_object()) throw CLI::ConversionError("config file: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static json scalar(const std::string& raw) {
    try {
      json v = json::parse(raw);
      if (v.is_number() || v.is_boolean() || v.is_array()) return v;
    } catch (const json::exception&) {
    }
    return raw;
  }

  static json dump(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config" || !opt->get_configurable()) continue;
      if (opt->count() > 0) {
        const auto& results = opt->results();
        if (results.size() == 1) {
          j[name] = scalar(results.front());
        } else {
          json arr = json::array();
          for (const auto& r : results) arr.push_back(scalar(r));
          j[name] = std::move(arr);
        }
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = scalar(opt->get_default_str());
      }
    }
    for (const CLI::App* sub : app->get_subcommands()) j[sub->get_name()] = dump(sub, default_also);
    return j;
  }

  static void collect(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      auto text = [&](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(text(v));
      } else {
        item.inputs.push_back(text(value));
      }
      items.push_back(std::move(item));
    }
  }
};

class Log {
 public:
  Log(std::ostream& err, bool quiet) : err_(err), quiet_(quiet) {}

  template <typename... Args>
  void info(const Args&... args) const {
    if (quiet_) return;
    (err_ << ... << args);
    err_ << '\n';
  }

 private:
  std::ostream& err_;
  bool quiet_;
};

std::string fmt(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw ValidationError(what + ": '" + s + "' is not a number");
  return v;
}

std::vector<double> parse_numbers(const std::string& text, char sep, const std::string& what) {
  std::vector<double> values;
  for (const auto& p : split(text, sep)) values.push_back(parse_double(p, what));
  if (values.empty()) throw ValidationError(what + ": empty list");
  return values;
}

// A JSON file ({"rates","weight"} or a bare list of rates) or a comma list.
BaseRate parse_base_rate(const std::string& spec, std::size_t num_classes, double weight) {
  std::vector<double> rates;
  if (fs::is_regular_file(spec)) {
    const json j = io::read_json_file(spec);
    if (j.is_object()) {
      BaseRate rate = io::base_rate_from_json(j);
      if (weight > 0.0 && rate.weight() != weight) {
        throw ValidationError("base-rate file weight " + fmt(rate.weight()) +
                              " differs from the expected W = " + fmt(weight));
      }
      rates.assign(rate.rates().begin(), rate.rates().end());
      weight = rate.weight();
    } else {
      try {
        rates = j.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw ValidationError("base-rate file must hold an object or a list of numbers");
      }
    }
  } else {
    rates = parse_numbers(spec, ',', "base rate");
  }
  if (num_classes != 0 && rates.size() != num_classes) {
    throw ValidationError("base rate has " + std::to_string(rates.size()) + " entries, expected " +
                          std::to_string(num_classes));
  }
  const double w = weight > 0.0 ? weight : static_cast<double>(rates.size());
  return BaseRate(std::move(rates), w);
}

void write_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

data::MultiViewDataset load_for_model(const net::EvidentialModel& model, const std::string& path) {
  const auto& cfg = model.config();
  return data::load_csv(path, cfg.num_classes, cfg.num_views(), cfg.view_dims);
}

json record_json(const data::MultiViewSample& s, const net::Prediction& p) {
  return json{{"id", s.id},
              {"label", s.label},
              {"predicted", p.predicted_class},
              {"confidence", p.probabilities[p.predicted_class]},
              {"uncertainty", p.uncertainty},
              {"probabilities", p.probabilities}};
}

struct Evaluation {
  std::vector<metrics::EvalRecord> records;
  std::vector<double> positive_scores;  // probability of class 1
  json per_sample = json::array();
};

Evaluation evaluate(const net::EvidentialModel& model, const data::MultiViewDataset& ds,
                    const std::optional<BaseRate>& override_rate) {
  Evaluation ev;
  for (const auto& s : ds.samples()) {
    const net::Prediction p = model.predict(s, override_rate);
    ev.records.push_back(metrics::EvalRecord{p.predicted_class,
                                             p.probabilities[p.predicted_class], p.uncertainty,
                                             s.label, s.id});
    ev.positive_scores.push_back(p.probabilities.size() > 1 ? p.probabilities[1] : 0.0);
    ev.per_sample.push_back(record_json(s, p));
  }
  return ev;
}

// ---------------------------------------------------------------------------
// fuse

struct FuseOptions {
  std::string opinions;
  std::string base_rate;
  double weight = 0.0;
  std::string chain = "paper";
};

Opinion fold(const std::vector<Opinion>& ops, const std::string& name,
             Opinion (*op)(const Opinion&, const Opinion&)) {
  Opinion acc = ops.front();
  for (std::size_t i = 1; i < ops.size(); ++i) {
    try {
      acc = op(acc, ops[i]);
    } catch (const FusionError& e) {
      throw FusionError(std::string(e.what()) + " (fusing opinions 0.." + std::to_string(i - 1) +
                            " with opinion " + std::to_string(i) + ")",
                        name);
    }
  }
  return acc;
}

void cmd_fuse(const FuseOptions& o, std::ostream& out, const Log& log) {
  const json doc = io::read_json_file(o.opinions);
  if (!doc.is_array()) throw ValidationError("opinions file must hold a JSON list");
  std::vector<Opinion> ops;
  for (const auto& item : doc) ops.push_back(io::opinion_from_json(item));
  if (ops.size() < 2) {
    throw ValidationError("fuse needs at least 2 opinions, got " + std::to_string(ops.size()));
  }
  const std::size_t k = ops.front().num_classes();
  for (std::size_t i = 1; i < ops.size(); ++i) {
    if (ops[i].num_classes() != k) {
      throw ValidationError("opinion " + std::to_string(i) + " has " +
                            std::to_string(ops[i].num_classes()) + " classes, opinion 0 has " +
                            std::to_string(k));
    }
  }
  const BaseRate rate = o.base_rate.empty()
                            ? BaseRate::uniform(k, o.weight > 0.0 ? o.weight : static_cast<double>(k))
                            : parse_base_rate(o.base_rate, k, o.weight);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].contains("base_rate")) continue;
    const BaseRate own = io::base_rate_from_json(doc[i].at("base_rate"));
    bool same = own.num_classes() == k && own.weight() == rate.weight();
    for (std::size_t c = 0; same && c < k; ++c) {
      same = std::abs(own.rates()[c] - rate.rates()[c]) <= 1e-12;
    }
    if (!same) {
      throw ValidationError("opinion " + std::to_string(i) +
                            " carries a base rate that differs from the fusion base rate");
    }
  }

  Opinion fused = Opinion::vacuous(k);
  if (o.chain == "cbf") {
    fused = fold(ops, "cbf", &sl::cbf_fuse);
  } else if (o.chain == "bcf") {
    fused = fold(ops, "bcf", &sl::bcf_fuse);
  } else {
    fused = sl::combine_views(ops);
  }
  const DirichletParams alpha = sl::dirichlet_from_opinion(fused, rate);
  const std::size_t cls = dir::predict_class(alpha);
  write_json(out, json{{"chain", o.chain},
                       {"opinion", io::to_json(fused)},
                       {"alpha", std::vector<double>(alpha.alpha().begin(), alpha.alpha().end())},
                       {"expected_probabilities", dir::expected_probabilities(alpha)},
                       {"predicted_class", cls}});
  log.info("fused ", ops.size(), " opinions with ", o.chain, ": u = ", fmt(fused.uncertainty()),
           ", class ", cls);
}

// ---------------------------------------------------------------------------
// gen

struct GenOptions {
  std::string out = "-";
  std::size_t classes = 2;
  std::size_t views = 4;
  std::size_t dim = 2;
  std::size_t n_per_class = 100;
  std::vector<std::size_t> counts;
  double separation = 3.0;
  double sd = 1.0;
  double shift = 0.0;
  std::string id_prefix = "s";
};

void cmd_gen(const GenOptions& o, std::uint64_t seed, std::ostream& out, const Log& log) {
  data::GeneratorSpec spec =
      data::GeneratorSpec::blobs(o.classes, o.views, o.dim, o.separation, o.sd, o.n_per_class, seed);
  if (!o.counts.empty()) spec.counts = o.counts;
  spec.id_prefix = o.id_prefix;
  spec.validate();
  const data::MultiViewDataset ds = o.shift != 0.0 ? data::gen_ood(spec, o.shift)
                                                   : data::gen_synthetic(spec);
  if (o.out == "-") {
    data::write_csv(ds, out);
  } else {
    data::save_csv(ds, o.out);
  }
  log.info("generated ", ds.size(), " samples (", o.classes, " classes, ", o.views, " views of dim ",
           o.dim, o.shift != 0.0 ? ", shift " + fmt(o.shift) : std::string(), ")");
}

// ---------------------------------------------------------------------------
// views

struct ViewsOptions {
  std::string grid;
  std::size_t roi = 160;
  std::size_t window = 96;
  std::size_t stride = 32;
  std::string center;
  std::size_t cutout = 0;
  std::string out_dir = ".";
};

void cmd_views(const ViewsOptions& o, std::uint64_t seed, std::ostream& out, const Log& log) {
  const data::ViewGeometry geom(o.roi, o.window, o.stride);
  std::optional<data::GridPoint> center;
  if (!o.center.empty()) {
    const auto rc = parse_numbers(o.center, ',', "center");
    if (rc.size() != 2 || rc[0] < 0 || rc[1] < 0 || rc[0] != std::floor(rc[0]) ||
        rc[1] != std::floor(rc[1])) {
      throw ValidationError("center must be 'row,col' with nonnegative integers");
    }
    center = data::GridPoint{static_cast<std::size_t>(rc[0]), static_cast<std::size_t>(rc[1])};
  }
  data::Grid2D grid = data::load_grid(o.grid);
  if (o.cutout > 0) grid = data::with_cutout(grid, o.cutout, seed);
  const data::ViewPatches patches = data::extract_views(grid, geom, center);

  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw IoError("cannot create " + o.out_dir + ": " + ec.message());
  json locals = json::array();
  for (std::size_t i = 0; i < patches.locals.size(); ++i) {
    const fs::path p = fs::path(o.out_dir) / ("local_" + std::to_string(i) + ".txt");
    data::save_grid(patches.locals[i], p);
    locals.push_back(p.string());
  }
  const fs::path g = fs::path(o.out_dir) / "global.txt";
  data::save_grid(patches.global, g);
  write_json(out, json{{"windows_per_side", geom.windows_per_side()},
                       {"locals", std::move(locals)},
                       {"global", g.string()}});
  log.info("wrote ", patches.locals.size(), " local views and the global view to ", o.out_dir);
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string train;
  std::string valid;
  std::string out;
  std::string report;
  std::size_t classes = 0;
  double weight = 0.0;
  std::vector<std::size_t> hidden = {32};
  std::string head = "dense";
  bool standardize = false;
  double lr = 1e-4;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t anneal = 0;
  std::string prior = "train";
};

void cmd_train(const TrainOptions& o, std::uint64_t seed, std::ostream& out, const Log& log) {
  const data::MultiViewDataset train = data::load_csv(o.train, o.classes);
  const data::MultiViewDataset valid =
      o.valid.empty() ? train
                      : data::load_csv(o.valid, train.num_classes(), train.num_views(),
                                       train.view_dims());
  net::ModelConfig cfg;
  cfg.num_classes = train.num_classes();
  cfg.view_dims.assign(train.view_dims().begin(), train.view_dims().end());
  cfg.weight = o.weight;
  cfg.hidden = o.hidden;
  cfg.head = io::head_kind_from_name(o.head);
  cfg.standardize_inputs = o.standardize;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.annealing_epochs = o.anneal;
  cfg.seed = seed;
  cfg.base_rate_policy =
      o.prior == "uniform" ? net::BaseRatePolicy::kUniform : net::BaseRatePolicy::kTrainFrequencies;
  cfg.validate();
  const BaseRate rate = cfg.base_rate_policy == net::BaseRatePolicy::kUniform
                            ? BaseRate::uniform(cfg.num_classes, cfg.resolved_weight())
                            : net::compute_base_rate(train.labels(), cfg.num_classes,
                                                     cfg.resolved_weight());
  net::EvidentialModel model(cfg, rate);
  log.info("training on ", train.size(), " samples (", cfg.num_views(), " views, ",
           model.num_parameters(), " parameters), validating on ", valid.size());

  const std::size_t every = std::max<std::size_t>(1, cfg.epochs / 10);
  const net::TrainingReport report = net::fit(model, train, valid, [&](const net::EpochStats& s) {
    if ((s.epoch + 1) % every == 0 || s.epoch + 1 == cfg.epochs) {
      log.info("epoch ", s.epoch + 1, "/", cfg.epochs, "  lambda ", fmt(s.lambda), "  loss ",
               fmt(s.train_loss), "  acc ", fmt(s.train_accuracy), "  valid loss ",
               fmt(s.valid_loss), "  valid acc ", fmt(s.valid_accuracy),
               s.skipped > 0 ? "  skipped " + std::to_string(s.skipped) : std::string());
    }
  });
  io::save_model(model, o.out);
  const json j = io::to_json(report);
  if (!o.report.empty()) write_json_file(o.report, j);
  write_json(out, j);
  log.info("saved model to ", o.out);
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  std::string model;
  std::string data;
  std::string base_rate_override;
  std::size_t bins = 10;
};

void cmd_eval(const EvalOptions& o, std::ostream& out, const Log& log) {
  const net::EvidentialModel model = io::load_model(o.model);
  const data::MultiViewDataset ds = load_for_model(model, o.data);
  std::optional<BaseRate> override_rate;
  if (!o.base_rate_override.empty()) {
    override_rate = parse_base_rate(o.base_rate_override, model.config().num_classes,
                                    model.base_rate().weight());
  }
  Evaluation ev = evaluate(model, ds, override_rate);
  json j = io::metrics_report(ev.records, ev.positive_scores, model.config().num_classes, o.bins);
  j["base_rate"] = io::to_json(override_rate ? *override_rate : model.base_rate());
  j["records"] = std::move(ev.per_sample);
  write_json(out, j);
  log.info("n ", ds.size(), "  acc ", fmt(j["acc"].get<double>()), "  ece ",
           fmt(j["ece"].get<double>()),
           j["auc"].is_null() ? std::string() : "  auc " + fmt(j["auc"].get<double>()));
}

// ---------------------------------------------------------------------------
// ood

struct OodOptions {
  std::string model;
  std::string id;
  std::string ood;
  double percentile = 50.0;
};

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void cmd_ood(const OodOptions& o, std::ostream& out, const Log& log) {
  const net::EvidentialModel model = io::load_model(o.model);
  const data::MultiViewDataset id = load_for_model(model, o.id);
  const data::MultiViewDataset ood = load_for_model(model, o.ood);
  std::vector<double> u_id;
  std::vector<double> u_ood;
  for (const auto& s : id.samples()) u_id.push_back(model.predict(s).uncertainty);
  for (const auto& s : ood.samples()) u_ood.push_back(model.predict(s).uncertainty);
  const metrics::OodResult r = metrics::ood_detect(u_id, u_ood, o.percentile);

  std::size_t correct = 0;
  json id_rows = json::array();
  for (std::size_t i = 0; i < id.size(); ++i) {
    const bool flag = r.scaled_val[i] > r.threshold;
    if (!flag) ++correct;
    id_rows.push_back(json{{"id", id[i].id},
                           {"uncertainty", u_id[i]},
                           {"scaled", r.scaled_val[i]},
                           {"flag", flag}});
  }
  json ood_rows = json::array();
  for (std::size_t i = 0; i < ood.size(); ++i) {
    if (r.flags[i]) ++correct;
    ood_rows.push_back(json{{"id", ood[i].id},
                            {"uncertainty", u_ood[i]},
                            {"scaled", r.scaled_test[i]},
                            {"flag", static_cast<bool>(r.flags[i])}});
  }
  const double det = static_cast<double>(correct) / static_cast<double>(id.size() + ood.size());
  write_json(out, json{{"percentile", o.percentile},
                       {"threshold", r.threshold},
                       {"raw_min", r.raw_min},
                       {"raw_max", r.raw_max},
                       {"mean_u_id", mean(u_id)},
                       {"mean_u_ood", mean(u_ood)},
                       {"mean_scaled_id", mean(r.scaled_val)},
                       {"mean_scaled_ood", mean(r.scaled_test)},
                       {"detection_accuracy", det},
                       {"id", std::move(id_rows)},
                       {"ood", std::move(ood_rows)}});
  log.info("mean u: id ", fmt(mean(u_id)), ", ood ", fmt(mean(u_ood)), "; detection accuracy ",
           fmt(det), " at percentile ", fmt(o.percentile));
}

// ---------------------------------------------------------------------------
// adapt-sweep

struct SweepOptions {
  std::string no_prior_model;
  std::string train_prior_model;
  std::string data;
  std::string ratios = "2:8,3:7,7:3,8:2";
  std::size_t total = 0;
  std::size_t bins = 10;
};

void cmd_adapt_sweep(const SweepOptions& o, std::uint64_t seed, std::ostream& out,
                     const Log& log) {
  const net::EvidentialModel train_prior = io::load_model(o.train_prior_model);
  std::optional<net::EvidentialModel> no_prior;
  if (!o.no_prior_model.empty()) {
    no_prior.emplace(io::load_model(o.no_prior_model));
    const auto& a = no_prior->config();
    const auto& b = train_prior.config();
    if (a.num_classes != b.num_classes || a.view_dims != b.view_dims) {
      throw ValidationError("the two models were trained on differently shaped data");
    }
  }
  const std::size_t k = train_prior.config().num_classes;
  const data::MultiViewDataset pool = load_for_model(train_prior, o.data);

  std::vector<std::pair<std::string, std::vector<double>>> ratios;
  for (const auto& text : split(o.ratios, ',')) {
    std::vector<double> r = parse_numbers(text, ':', "ratio");
    if (r.size() != k) {
      throw ValidationError("ratio '" + text + "' has " + std::to_string(r.size()) +
                            " parts, expected " + std::to_string(k));
    }
    ratios.emplace_back(text, std::move(r));
  }

  out << "ratio,strategy,n,auc,ece,acc\n";
  auto row = [&](const std::string& ratio, const char* strategy, const Evaluation& ev,
                 const data::MultiViewDataset& test) {
    std::string auc;
    if (k == 2) auc = fmt(metrics::auc_binary(ev.positive_scores, test.labels()));
    const double e = metrics::ece(ev.records, o.bins);
    const double acc = metrics::accuracy(ev.records);
    out << ratio << ',' << strategy << ',' << test.size() << ',' << auc << ',' << fmt(e) << ','
        << fmt(acc) << '\n';
    log.info(ratio, "  ", strategy, "  n ", test.size(), "  auc ", auc.empty() ? "-" : auc,
             "  ece ", fmt(e), "  acc ", fmt(acc));
  };
  for (const auto& [text, r] : ratios) {
    const data::MultiViewDataset test = data::resample_class_ratio(pool, r, seed, o.total);
    const double sum = std::accumulate(r.begin(), r.end(), 0.0);
    std::vector<double> rates;
    for (double x : r) rates.push_back(x / sum);
    const BaseRate test_rate(std::move(rates), train_prior.base_rate().weight());
    if (no_prior) row(text, "no-prior", evaluate(*no_prior, test, std::nullopt), test);
    row(text, "train-prior", evaluate(train_prior, test, std::nullopt), test);
    row(text, "train-test", evaluate(train_prior, test, test_rate), test);
  }
}

// ---------------------------------------------------------------------------

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const IoError*>(&e)) return kExitIo;
  if (dynamic_cast<const json::exception*>(&e)) return kExitValidation;
  return kExitOther;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view evidential classification with belief fusion"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option defaults (flags take precedence)");

  std::uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--seed", seed, "Random seed");
  app.add_flag("--quiet", quiet, "Suppress progress output on stderr");

  FuseOptions fuse;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse a list of opinions");
  fuse_cmd->add_option("--opinions", fuse.opinions, "JSON list of opinions")->required();
  fuse_cmd->add_option("--base-rate", fuse.base_rate, "Base rate: JSON file or comma list (default uniform)");
  fuse_cmd->add_option("--weight", fuse.weight, "Prior weight W (default K)")
      ->check(CLI::NonNegativeNumber);
  fuse_cmd->add_option("--chain", fuse.chain, "cbf, bcf or paper (CBF over all but the last, then BCF)")
      ->check(CLI::IsMember({"cbf", "bcf", "paper"}));

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic multi-view dataset as CSV");
  gen_cmd->add_option("--out", gen.out, "Output CSV ('-' for stdout)");
  gen_cmd->add_option("--classes", gen.classes)->check(CLI::Range(2, 1000));
  gen_cmd->add_option("--views", gen.views)->check(CLI::Range(1, 1000));
  gen_cmd->add_option("--dim", gen.dim, "Features per view")->check(CLI::Range(1, 100000));
  gen_cmd->add_option("--n-per-class", gen.n_per_class);
  gen_cmd->add_option("--counts", gen.counts, "Per-class sample counts (overrides --n-per-class)")
      ->delimiter(',');
  gen_cmd->add_option("--separation", gen.separation, "Distance between class means");
  gen_cmd->add_option("--sd", gen.sd, "Cluster standard deviation");
  gen_cmd->add_option("--shift", gen.shift, "Out-of-distribution shift orthogonal to the class axis");
  gen_cmd->add_option("--id-prefix", gen.id_prefix);

  ViewsOptions views;
  auto* views_cmd = app.add_subcommand("views", "Cut a grid into local windows and a global view");
  views_cmd->add_option("--grid", views.grid, "Whitespace-separated grid file")->required();
  views_cmd->add_option("--roi", views.roi);
  views_cmd->add_option("--window", views.window);
  views_cmd->add_option("--stride", views.stride);
  views_cmd->add_option("--center", views.center, "ROI center as row,col (default grid center)");
  views_cmd->add_option("--cutout", views.cutout, "Side of a zeroed square (0 disables)");
  views_cmd->add_option("--out-dir", views.out_dir);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train a multi-view evidential model");
  train_cmd->add_option("--train", train.train, "Training CSV")->required();
  train_cmd->add_option("--valid", train.valid, "Validation CSV (default: the training set)");
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--report", train.report, "Also write the training report here");
  train_cmd->add_option("--classes", train.classes, "Class count (0 infers from labels)");
  train_cmd->add_option("--weight", train.weight, "Prior weight W (0 means K)")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--hidden", train.hidden, "Hidden layer sizes")->delimiter(',');
  train_cmd->add_option("--head", train.head, "dense (tanh) or rbf (Gaussian first layer)")
      ->check(CLI::IsMember({"dense", "rbf"}));
  train_cmd->add_flag("--standardize", train.standardize,
                      "Standardize inputs with training-set mean and sd");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", train.epochs);
  train_cmd->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--anneal", train.anneal, "Epochs for lambda to reach 1 (0 means --epochs)");
  train_cmd->add_option("--prior", train.prior, "Base rate: train frequencies or uniform")
      ->check(CLI::IsMember({"train", "uniform"}));

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model: accuracy, AUC, ECE, per-sample uncertainty");
  eval_cmd->add_option("--model", eval.model)->required();
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--base-rate-override", eval.base_rate_override,
                       "Base rate used at test time: JSON file or comma list");
  eval_cmd->add_option("--bins", eval.bins, "Calibration bins")->check(CLI::PositiveNumber);

  OodOptions ood;
  auto* ood_cmd = app.add_subcommand("ood", "Flag out-of-distribution samples by uncertainty");
  ood_cmd->add_option("--model", ood.model)->required();
  ood_cmd->add_option("--id", ood.id, "In-distribution CSV")->required();
  ood_cmd->add_option("--ood", ood.ood, "Candidate out-of-distribution CSV")->required();
  ood_cmd->add_option("--percentile", ood.percentile, "Threshold percentile of the pooled scaled uncertainty")
      ->check(CLI::Range(0.0, 100.0));

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("adapt-sweep", "Compare base-rate strategies under class-ratio shift");
  sweep_cmd->add_option("--no-prior-model", sweep.no_prior_model, "Model trained with a uniform base rate");
  sweep_cmd->add_option("--train-prior-model", sweep.train_prior_model,
                        "Model trained with the training-set base rate")
      ->required();
  sweep_cmd->add_option("--data", sweep.data, "Test pool CSV")->required();
  sweep_cmd->add_option("--ratios", sweep.ratios, "Comma-separated class ratios, e.g. 2:8,8:2");
  sweep_cmd->add_option("--total", sweep.total, "Samples per ratio (0 = largest achievable)");
  sweep_cmd->add_option("--bins", sweep.bins, "Calibration bins")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    if (dynamic_cast<const CLI::FileError*>(&e)) return kExitIo;
    return kExitValidation;
  }

  const Log log(err, quiet);
  log.info("config: ", app.config_to_str(true, false));
  try {
    if (fuse_cmd->parsed()) cmd_fuse(fuse, out, log);
    if (gen_cmd->parsed()) cmd_gen(gen, seed, out, log);
    if (views_cmd->parsed()) cmd_views(views, seed, out, log);
    if (train_cmd->parsed()) cmd_train(train, seed, out, log);
    if (eval_cmd->parsed()) cmd_eval(eval, out, log);
    if (ood_cmd->parsed()) cmd_ood(ood, out, log);
    if (sweep_cmd->parsed()) cmd_adapt_sweep(sweep, seed, out, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  }
  out.flush();
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace evfuse::cli
