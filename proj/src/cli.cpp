#include "peval/cli.hpp"

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "peval/bounds.hpp"
#include "peval/errors.hpp"
#include "peval/estimators.hpp"
#include "peval/experiments.hpp"
#include "peval/io.hpp"
#include "peval/kernels.hpp"
#include "peval/policy.hpp"
#include "peval/pomdp.hpp"

namespace peval::cli {

namespace {

using io::json;

// Flag-over-config resolution: a flag set on the command line wins, then the
// config file, then the default (if any).
class Resolver {
public:
  Resolver() : config_(json::object()), origin_("<no config>") {}
  Resolver(json config, std::string origin) : config_(std::move(config)), origin_(std::move(origin)) {}

  template <class T>
  std::optional<T> maybe(const std::optional<T>& flag, const std::string& key) const {
    if (flag) return flag;
    if (config_.contains(key)) return field_as<T>(key);
    return std::nullopt;
  }

  template <class T>
  T req(const std::optional<T>& flag, const std::string& key) const {
    auto v = maybe(flag, key);
    if (!v) throw validation_error(origin_ + ": missing required field '" + key + "' (flag or config)");
    return *v;
  }

  template <class T>
  T opt(const std::optional<T>& flag, const std::string& key, T fallback) const {
    auto v = maybe(flag, key);
    return v ? *v : fallback;
  }

  bool has(const std::string& key) const { return config_.contains(key); }
  const json& raw(const std::string& key) const { return io::require_key(config_, key, origin_); }
  const std::string& origin() const { return origin_; }

private:
  template <class T>
  T field_as(const std::string& key) const {
    const json& v = config_[key];
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw validation_error(origin_ + ": field '" + key + "' has the wrong type");
    }
  }

  json config_;
  std::string origin_;
};

Resolver make_resolver(const std::optional<std::string>& config_path) {
  if (!config_path) return Resolver();
  json cfg = io::parse_file(*config_path);
  io::check_format_version(cfg, *config_path);
  return Resolver(std::move(cfg), *config_path);
}

ReturnSpec resolve_return_spec(const Resolver& r, const std::optional<std::string>& kind,
                               const std::optional<std::int64_t>& horizon, const std::optional<double>& gamma,
                               const std::optional<double>& r_max) {
  json spec = r.has("return_spec") ? r.raw("return_spec") : json::object();
  if (kind) spec["kind"] = *kind;
  if (horizon) spec["horizon"] = *horizon;
  if (gamma) spec["gamma"] = *gamma;
  if (r_max) spec["r_max"] = *r_max;
  return io::return_spec_from_json(spec, r.origin() + " return_spec");
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "crude") return EstimatorKind::crude;
  if (name == "is") return EstimatorKind::is;
  if (name == "wis") return EstimatorKind::wis;
  throw validation_error("unknown estimator '" + name + "' (crude|is|wis)");
}

EpsilonVariant parse_variant(const std::string& name) {
  if (name == "paper_form" || name == "paper") return EpsilonVariant::paper_form;
  if (name == "exact_form" || name == "exact") return EpsilonVariant::exact_form;
  throw validation_error("unknown variant '" + name + "' (paper_form|exact_form)");
}

void set_if(json& row, const char* key, const std::optional<double>& v) {
  row[key] = v ? json(*v) : json(nullptr);
}

// Options shared by most subcommands; each handler reads what it needs.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> model;
  std::optional<std::string> behavior_policy;
  std::optional<std::string> target_policy;
  std::optional<std::string> policy_class;
  std::optional<std::string> dataset;
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::optional<std::string> estimator;
  std::optional<std::string> variant;
  std::optional<std::string> return_kind;
  std::optional<std::int64_t> n_samples;
  std::optional<std::int64_t> m_replications;
  std::optional<std::int64_t> horizon;
  std::optional<double> gamma;
  std::optional<double> r_max;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> v_max;
  std::optional<double> eta;
  std::optional<std::uint64_t> master_seed;
  std::optional<std::int64_t> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its fields");
  cmd->add_option("--model", f.model, "POMDP model file");
  cmd->add_option("--behavior", f.behavior_policy, "behavior (sampling) policy file");
  cmd->add_option("--target", f.target_policy, "target policy file");
  cmd->add_option("--class", f.policy_class, "policy class file");
  cmd->add_option("--dataset", f.dataset, "dataset file");
  cmd->add_option("--out", f.output, "output file (default stdout)");
  cmd->add_option("--format", f.format, "report format: csv|json (default csv)");
  cmd->add_option("--estimator", f.estimator, "estimator: crude|is|wis");
  cmd->add_option("--variant", f.variant, "bound variant: paper_form|exact_form");
  cmd->add_option("--return-kind", f.return_kind, "finite_horizon|discounted");
  cmd->add_option("--n", f.n_samples, "number of samples N");
  cmd->add_option("--m", f.m_replications, "number of replications M");
  cmd->add_option("--horizon", f.horizon, "horizon T");
  cmd->add_option("--gamma", f.gamma, "discount factor");
  cmd->add_option("--r-max", f.r_max, "reward bound r_max");
  cmd->add_option("--eps", f.epsilon, "accuracy epsilon");
  cmd->add_option("--delta", f.delta, "confidence delta");
  cmd->add_option("--v-max", f.v_max, "return/value bound V_max");
  cmd->add_option("--eta", f.eta, "likelihood ratio bound eta");
  cmd->add_option("--seed", f.master_seed, "master seed");
  cmd->add_option("--threads", f.threads, "worker threads (0 = auto)");
}

std::string resolve_format(const Resolver& r, const CommonFlags& f) {
  const std::string format = r.opt<std::string>(f.format, "format", "csv");
  if (format != "csv" && format != "json") throw validation_error("format must be csv or json");
  return format;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  bool any = false;
  if (auto path = r.maybe(f.model, "model")) {
    io::load_pomdp(*path);
    std::cout << "ok: pomdp " << *path << "\n";
    any = true;
  }
  if (auto path = r.maybe(f.behavior_policy, "behavior_policy")) {
    io::load_policy(*path);
    std::cout << "ok: policy " << *path << "\n";
    any = true;
  }
  if (auto path = r.maybe(f.target_policy, "target_policy")) {
    io::load_policy(*path);
    std::cout << "ok: policy " << *path << "\n";
    any = true;
  }
  if (auto path = r.maybe(f.policy_class, "policy_class")) {
    io::load_policy_class(*path);
    std::cout << "ok: policy_class " << *path << "\n";
    any = true;
  }
  if (auto path = r.maybe(f.dataset, "dataset")) {
    io::load_dataset(*path);
    std::cout << "ok: dataset " << *path << "\n";
    any = true;
  }
  if (!any) throw validation_error("validate: nothing to validate (give --model/--behavior/--class/--dataset)");
  return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  const Pomdp model = io::load_pomdp(r.req<std::string>(f.model, "model"));
  const Policy behavior = io::load_policy(r.req<std::string>(f.behavior_policy, "behavior_policy"));
  const ReturnSpec spec = resolve_return_spec(r, f.return_kind, f.horizon, f.gamma, f.r_max);
  const std::int64_t n = r.req<std::int64_t>(f.n_samples, "n_samples");
  const std::uint64_t seed = r.req<std::uint64_t>(f.master_seed, "master_seed");
  const int threads = static_cast<int>(r.opt<std::int64_t>(f.threads, "threads", 0));

  const SampleSet samples = sampling_stage(model, behavior, spec, n, seed, threads);
  const std::string out = r.opt<std::string>(f.dataset, "dataset", "");
  if (out.empty()) {
    io::write_dataset(samples, behavior, std::cout);
  } else {
    io::save_dataset(samples, behavior, out);
    std::cerr << "wrote " << n << " histories to " << out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- estimate

io::Report estimate_report() {
  io::Report report;
  report.type = "estimate";
  report.columns = {"format_version", "report_type", "dataset",   "behavior_policy_id", "target_policy",
                    "estimator",      "n_samples",   "master_seed", "value",            "std_error",
                    "weight_min",     "weight_max",  "weight_mean"};
  return report;
}

int cmd_estimate(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  const std::string dataset_path = r.req<std::string>(f.dataset, "dataset");
  const io::Dataset ds = io::load_dataset(dataset_path);
  const EstimatorKind kind = parse_estimator(r.opt<std::string>(f.estimator, "estimator", "is"));

  std::string target_name = "-";
  Estimate est;
  if (kind == EstimatorKind::crude) {
    est = crude_estimate(ds.samples.returns);
  } else {
    const std::string target_path = r.req<std::string>(f.target_policy, "target_policy");
    const Policy target = io::load_policy(target_path);
    target_name = target.id.empty() ? target_path : target.id;
    est = estimation_stage(ds.samples, target, kind);
  }

  io::Report report = estimate_report();
  json row = report.new_row();
  row["dataset"] = dataset_path;
  row["behavior_policy_id"] = ds.samples.behavior_policy_id;
  row["target_policy"] = target_name;
  row["estimator"] = estimator_name(kind);
  row["n_samples"] = est.n_samples;
  row["master_seed"] = ds.samples.master_seed;
  row["value"] = est.value;
  row["std_error"] = est.std_error;
  row["weight_min"] = est.weight_min;
  row["weight_max"] = est.weight_max;
  row["weight_mean"] = est.weight_mean;
  report.rows.push_back(std::move(row));
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ---------------------------------------------------------------- bounds

struct BoundFlags {
  std::optional<std::string> formula;
  std::optional<double> entropy_k;
  std::optional<std::int64_t> vc_dim;
  std::optional<double> c_floor;
  std::optional<double> covering_count;
  std::optional<double> k1;
  std::optional<double> k2;
  std::optional<double> regret;
  std::optional<double> tolerance;
  std::optional<std::int64_t> num_actions;
};

io::Report bound_report() {
  io::Report report;
  report.type = "bound";
  report.columns = {"format_version", "report_type", "formula",  "quantity", "variant",       "value",
                    "v_max",          "eta",         "delta",    "epsilon",  "n",             "horizon",
                    "c_floor",        "entropy_k",   "vc_dim",   "covering_count", "k1",      "k2",
                    "tolerance"};
  return report;
}

int cmd_bounds(const CommonFlags& f, const BoundFlags& bf) {
  const Resolver r = make_resolver(f.config);
  const std::string formula = r.req<std::string>(bf.formula, "formula");
  const std::optional<double> delta = r.maybe(f.delta, "delta");
  if (delta && !(*delta > 0.0 && *delta <= 1.0))
    throw validation_error("field 'delta': must lie in (0, 1], got " + std::to_string(*delta));

  BoundInputs in;
  in.v_max = r.opt<double>(f.v_max, "v_max", 1.0);
  in.delta = delta.value_or(0.1);
  in.horizon = r.opt<std::int64_t>(f.horizon, "horizon", 1);
  in.entropy_k = r.opt<double>(bf.entropy_k, "entropy_k", 0.0);
  in.c_floor = r.opt<double>(bf.c_floor, "c_floor", 0.0);
  if (auto vc = r.maybe(bf.vc_dim, "vc_dim")) in.vc_dim = static_cast<int>(*vc);
  const int num_actions = static_cast<int>(r.opt<std::int64_t>(bf.num_actions, "num_actions", 2));
  if (auto eta = r.maybe(f.eta, "eta"))
    in.eta = *eta;
  else
    in.eta = eta_bound(in.horizon, in.c_floor, num_actions);

  const std::optional<double> eps = r.maybe(f.epsilon, "epsilon");
  const std::optional<std::int64_t> n = r.maybe(f.n_samples, "n_samples");
  const EpsilonVariant variant = parse_variant(r.opt<std::string>(f.variant, "variant", "paper_form"));
  const double tolerance = r.opt<double>(bf.tolerance, "tolerance", 1e-9);
  const std::optional<double> covering_count = r.maybe(bf.covering_count, "covering_count");
  std::optional<PolicyClass> cls;
  if (auto path = r.maybe(f.policy_class, "policy_class")) cls = io::load_policy_class(*path);

  CoveringFn covering = [&](double radius) -> double {
    if (cls) return static_cast<double>(covering_number(*cls, radius).count);
    if (covering_count) return *covering_count;
    throw validation_error("this formula needs --covering-count or --class");
  };
  EntropyFn entropy = [&](double radius) -> double {
    if (cls) return metric_entropy(*cls, radius);
    if (bf.k1 || r.has("k1")) {
      EntropyProfile profile;
      profile.parametric = true;
      profile.k1 = r.req<double>(bf.k1, "k1");
      profile.k2 = r.opt<double>(bf.k2, "k2", 1.0);
      return parametric_entropy(profile, in.horizon, radius);
    }
    throw validation_error("this formula needs --k1/--k2 or --class");
  };

  auto need_eps = [&]() -> double {
    if (!eps) throw validation_error("this formula needs --eps");
    return *eps;
  };
  auto need_n = [&]() -> std::int64_t {
    if (!n) throw validation_error("this formula needs --n");
    return *n;
  };

  std::string quantity;
  std::string variant_label = "exact_form";
  double value = 0.0;
  if (formula == "lemma2-epsilon") {
    quantity = "epsilon";
    variant_label = variant_name(variant);
    value = single_policy_epsilon(in, need_n(), variant);
  } else if (formula == "theorem2-n") {
    quantity = "sample_size";
    value = static_cast<double>(uniform_sample_size(in, need_eps(), covering));
  } else if (formula == "theorem2-epsilon") {
    quantity = "epsilon";
    value = uniform_epsilon(in, need_n(), covering);
  } else if (formula == "stated-n") {
    quantity = "sample_size";
    variant_label = "big_o_unit_constant";
    value = theorem_sample_size_stated(in, need_eps());
  } else if (formula == "kearns-n") {
    quantity = "sample_size";
    variant_label = "big_o_unit_constant";
    if (!in.vc_dim) throw validation_error("kearns-n needs --vc");
    value = kearns_sample_size(in.v_max / need_eps(), in.horizon, *in.vc_dim, in.delta);
  } else if (formula == "mcdiarmid-n") {
    quantity = "sample_size";
    variant_label = "big_o_unit_constant";
    value = mcdiarmid_sample_size(in, need_eps());
  } else if (formula == "parametric-n") {
    quantity = "sample_size";
    variant_label = "big_o_unit_constant";
    value = parametric_sample_size(in.v_max, need_eps(), r.req<double>(bf.k1, "k1"), in.entropy_k, in.delta,
                                   in.horizon);
  } else if (formula == "regret") {
    quantity = "regret";
    value = regret_bound(entropy, tolerance);
  } else if (formula == "parametric-regret") {
    quantity = "regret";
    variant_label = "big_o_unit_constant";
    value = parametric_regret(r.req<double>(bf.k1, "k1"), in.horizon);
  } else if (formula == "eta-from-regret") {
    quantity = "eta";
    value = eta_from_regret(r.req<double>(bf.regret, "regret"));
  } else if (formula == "eta") {
    quantity = "eta";
    value = eta_bound(in.horizon, in.c_floor, num_actions);
  } else {
    throw validation_error("unknown formula '" + formula + "'");
  }

  io::Report report = bound_report();
  json row = report.new_row();
  row["formula"] = formula;
  row["quantity"] = quantity;
  row["variant"] = variant_label;
  row["value"] = value;
  row["v_max"] = in.v_max;
  row["eta"] = in.eta;
  row["delta"] = in.delta;
  set_if(row, "epsilon", eps);
  row["n"] = n ? json(*n) : json(nullptr);
  row["horizon"] = in.horizon;
  row["c_floor"] = in.c_floor;
  row["entropy_k"] = in.entropy_k;
  row["vc_dim"] = in.vc_dim ? json(*in.vc_dim) : json(nullptr);
  set_if(row, "covering_count", covering_count);
  set_if(row, "k1", r.maybe(bf.k1, "k1"));
  set_if(row, "k2", r.maybe(bf.k2, "k2"));
  row["tolerance"] = tolerance;
  report.rows.push_back(std::move(row));
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ---------------------------------------------------------------- coverage

int cmd_coverage(const CommonFlags& f, bool emit_deviations) {
  const Resolver r = make_resolver(f.config);
  const Pomdp model = io::load_pomdp(r.req<std::string>(f.model, "model"));
  const Policy behavior = io::load_policy(r.req<std::string>(f.behavior_policy, "behavior_policy"));
  const Policy target = io::load_policy(r.req<std::string>(f.target_policy, "target_policy"));
  const ReturnSpec spec = resolve_return_spec(r, f.return_kind, f.horizon, f.gamma, f.r_max);
  std::optional<PolicyClass> cls;
  if (auto path = r.maybe(f.policy_class, "policy_class")) cls = io::load_policy_class(*path);

  CoverageConfig cfg;
  cfg.n_samples = r.req<std::int64_t>(f.n_samples, "n_samples");
  cfg.m_replications = r.req<std::int64_t>(f.m_replications, "m_replications");
  cfg.delta = r.req<double>(f.delta, "delta");
  cfg.v_max = r.req<double>(f.v_max, "v_max");
  const double floor = cls ? cls->floor : target.floor;
  cfg.eta = r.opt<double>(f.eta, "eta", eta_bound(spec.horizon, floor, model.num_actions));
  cfg.master_seed = r.req<std::uint64_t>(f.master_seed, "master_seed");
  cfg.variant = parse_variant(r.opt<std::string>(f.variant, "variant", "paper_form"));
  if (auto eps = r.maybe(f.epsilon, "epsilon")) cfg.epsilon_override = *eps;
  cfg.threads = static_cast<int>(r.opt<std::int64_t>(f.threads, "threads", 0));

  const CoverageResult res = coverage_experiment(model, behavior, target, cls ? &*cls : nullptr, spec, cfg);

  io::Report report;
  report.type = "coverage";
  report.columns = {"format_version", "report_type",  "row",        "model",        "behavior_policy",
                    "target_policy",  "policy_class", "n_samples",  "m_replications", "delta",
                    "variant",        "v_max",        "eta",        "epsilon",      "exact_value",
                    "violation_count", "empirical_rate", "sup_epsilon", "sup_violation_count",
                    "sup_empirical_rate", "master_seed", "replication", "deviation",  "sup_deviation"};
  json row = report.new_row();
  row["row"] = "summary";
  row["model"] = model.id;
  row["behavior_policy"] = behavior.id;
  row["target_policy"] = target.id;
  row["policy_class"] = cls ? json(cls->id) : json(nullptr);
  row["n_samples"] = cfg.n_samples;
  row["m_replications"] = cfg.m_replications;
  row["delta"] = cfg.delta;
  row["variant"] = variant_name(cfg.variant);
  row["v_max"] = cfg.v_max;
  row["eta"] = cfg.eta;
  row["epsilon"] = res.epsilon;
  row["exact_value"] = res.exact_target_value;
  row["violation_count"] = res.violation_count;
  row["empirical_rate"] = res.empirical_rate;
  row["sup_epsilon"] = cls ? json(res.sup_epsilon) : json(nullptr);
  row["sup_violation_count"] = cls ? json(res.sup_violation_count) : json(nullptr);
  row["sup_empirical_rate"] = cls ? json(res.sup_empirical_rate) : json(nullptr);
  row["master_seed"] = cfg.master_seed;
  report.rows.push_back(std::move(row));

  if (emit_deviations) {
    for (std::size_t i = 0; i < res.deviations.size(); ++i) {
      json dev_row = report.new_row();
      dev_row["row"] = "replication";
      dev_row["replication"] = i;
      dev_row["deviation"] = res.deviations[i];
      if (cls) dev_row["sup_deviation"] = res.sup_deviations[i];
      report.rows.push_back(std::move(dev_row));
    }
  }
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ------------------------------------------------------- compare-estimators

int cmd_compare_estimators(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  const Pomdp model = io::load_pomdp(r.req<std::string>(f.model, "model"));
  const Policy behavior = io::load_policy(r.req<std::string>(f.behavior_policy, "behavior_policy"));
  const Policy target = io::load_policy(r.req<std::string>(f.target_policy, "target_policy"));
  const ReturnSpec spec = resolve_return_spec(r, f.return_kind, f.horizon, f.gamma, f.r_max);
  std::vector<std::int64_t> schedule;
  if (r.has("schedule"))
    for (const auto& v : r.raw("schedule")) schedule.push_back(v.get<std::int64_t>());
  else if (f.n_samples)
    schedule.push_back(*f.n_samples);
  else
    throw validation_error("compare-estimators needs a 'schedule' list or --n");
  const std::int64_t m = r.req<std::int64_t>(f.m_replications, "m_replications");
  const std::uint64_t seed = r.req<std::uint64_t>(f.master_seed, "master_seed");
  const int threads = static_cast<int>(r.opt<std::int64_t>(f.threads, "threads", 0));

  const auto rows = estimator_comparison(model, behavior, target, spec, schedule, m, seed, threads);

  io::Report report;
  report.type = "estimator_comparison";
  report.columns = {"format_version", "report_type", "estimator", "n_samples", "m_replications",
                    "mean",           "bias",        "variance",  "exact_value", "exact_is_variance",
                    "master_seed"};
  for (const auto& row : rows) {
    json out = report.new_row();
    out["estimator"] = row.estimator;
    out["n_samples"] = row.n;
    out["m_replications"] = row.m;
    out["mean"] = row.mean;
    out["bias"] = row.bias;
    out["variance"] = row.variance;
    out["exact_value"] = row.exact_value;
    out["exact_is_variance"] = row.exact_is_variance;
    out["master_seed"] = seed;
    report.rows.push_back(std::move(out));
  }
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ----------------------------------------------------------- compare-bounds

int cmd_compare_bounds(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  BoundComparisonGrid grid;
  if (r.has("horizons"))
    for (const auto& v : r.raw("horizons")) grid.horizons.push_back(v.get<std::int64_t>());
  if (r.has("ratios"))
    for (const auto& v : r.raw("ratios")) grid.ratios.push_back(v.get<double>());
  if (grid.horizons.empty() || grid.ratios.empty())
    throw validation_error("compare-bounds needs 'horizons' and 'ratios' lists in the config");
  grid.v_max = r.opt<double>(f.v_max, "v_max", 1.0);
  grid.delta = r.opt<double>(f.delta, "delta", 0.1);
  if (r.has("entropy_k")) grid.entropy_k = r.raw("entropy_k").get<double>();
  if (r.has("vc_dim")) grid.vc_dim = r.raw("vc_dim").get<int>();
  if (r.has("c_floor")) grid.c_floor = r.raw("c_floor").get<double>();
  if (r.has("covering_count")) grid.covering_count = r.raw("covering_count").get<double>();
  if (r.has("k1")) grid.k1 = r.raw("k1").get<double>();

  const auto rows = bound_comparison(grid);
  io::Report report;
  report.type = "bound_comparison";
  report.columns = {"format_version", "report_type", "horizon",    "ratio",     "eps",
                    "delta",          "entropy_k",   "vc_dim",     "eta",       "n_uniform",
                    "n_stated",       "n_kearns",    "n_mcdiarmid", "n_parametric"};
  for (const auto& row : rows) {
    json out = report.new_row();
    out["horizon"] = row.horizon;
    out["ratio"] = row.ratio;
    out["eps"] = row.eps;
    out["delta"] = row.delta;
    out["entropy_k"] = row.entropy_k;
    out["vc_dim"] = row.vc_dim;
    out["eta"] = row.eta;
    out["n_uniform"] = row.n_uniform;
    out["n_stated"] = row.n_stated;
    out["n_kearns"] = row.n_kearns;
    out["n_mcdiarmid"] = row.n_mcdiarmid;
    out["n_parametric"] = row.n_parametric;
    report.rows.push_back(std::move(out));
  }
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ------------------------------------------------------------------- srm

int cmd_srm(const CommonFlags& f) {
  const Resolver r = make_resolver(f.config);
  if (!r.has("classes")) throw validation_error("srm needs a 'classes' list in the config");
  const json& classes_json = r.raw("classes");
  if (!classes_json.is_array() || classes_json.empty())
    throw validation_error("srm: 'classes' must be a nonempty array");

  std::vector<PolicyClass> loaded;  // keeps covering closures alive
  std::vector<SrmClassInput> classes;
  for (std::size_t i = 0; i < classes_json.size(); ++i) {
    const json& c = classes_json[i];
    const std::string origin = r.origin() + " classes[" + std::to_string(i) + "]";
    SrmClassInput input;
    input.id = io::get_string(c, "id", origin);
    input.value_estimate = io::get_double(c, "value_estimate", origin);
    if (c.contains("covering_count")) {
      const double count = io::get_double(c, "covering_count", origin);
      input.covering = [count](double) { return count; };
    } else if (c.contains("class")) {
      loaded.push_back(io::load_policy_class(io::get_string(c, "class", origin)));
      const PolicyClass* cls = &loaded.back();
      input.covering = [cls](double eps) { return static_cast<double>(covering_number(*cls, eps).count); };
    } else {
      throw validation_error(origin + ": needs 'covering_count' or 'class'");
    }
    classes.push_back(std::move(input));
  }

  BoundInputs shared;
  shared.v_max = r.req<double>(f.v_max, "v_max");
  shared.eta = r.req<double>(f.eta, "eta");
  shared.horizon = r.opt<std::int64_t>(f.horizon, "horizon", 1);
  const std::int64_t n = r.req<std::int64_t>(f.n_samples, "n_samples");
  const double delta = r.req<double>(f.delta, "delta");
  const SrmSelection sel = srm_select(classes, n, delta, shared);

  io::Report report;
  report.type = "srm";
  report.columns = {"format_version", "report_type", "class_id",       "n_samples", "delta",
                    "delta_per_class", "v_max",      "eta",            "epsilon",   "value_estimate",
                    "lower_bound",    "chosen"};
  for (std::size_t i = 0; i < classes.size(); ++i) {
    json row = report.new_row();
    row["class_id"] = classes[i].id;
    row["n_samples"] = n;
    row["delta"] = delta;
    row["delta_per_class"] = delta / static_cast<double>(classes.size());
    row["v_max"] = shared.v_max;
    row["eta"] = shared.eta;
    row["epsilon"] = sel.epsilons[i];
    row["value_estimate"] = classes[i].value_estimate;
    row["lower_bound"] = sel.lower_bounds[i];
    row["chosen"] = i == sel.chosen_index;
    report.rows.push_back(std::move(row));
  }
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

// ---------------------------------------------------------------- oracle

int cmd_oracle(const CommonFlags& f, const std::optional<std::string>& op_flag) {
  const Resolver r = make_resolver(f.config);
  const std::string op = r.req<std::string>(op_flag, "oracle_op");
  const Pomdp model = io::load_pomdp(r.req<std::string>(f.model, "model"));
  const Policy target = io::load_policy(r.req<std::string>(f.target_policy, "target_policy"));
  const ReturnSpec spec = resolve_return_spec(r, f.return_kind, f.horizon, f.gamma, f.r_max);

  if (op == "enumerate") {
    io::Report report;
    report.type = "enumeration";
    report.columns = {"format_version", "report_type", "index",    "observations", "actions",
                      "rewards",        "env_prob",    "action_prob", "return"};
    const auto entries = enumerate_histories(model, spec, target);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      std::ostringstream obs, act, rew;
      for (std::size_t t = 0; t < e.history.steps.size(); ++t) {
        if (t > 0) {
          obs << ' ';
          act << ' ';
          rew << ' ';
        }
        obs << e.history.steps[t].observation;
        act << e.history.steps[t].action;
        rew << json(e.history.steps[t].reward).dump();
      }
      json row = report.new_row();
      row["index"] = i;
      row["observations"] = obs.str();
      row["actions"] = act.str();
      row["rewards"] = rew.str();
      row["env_prob"] = e.env_prob;
      row["action_prob"] = e.action_prob;
      row["return"] = compute_return(e.history, spec);
      report.rows.push_back(std::move(row));
    }
    io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
    return 0;
  }

  io::Report report;
  report.type = "oracle";
  report.columns = {"format_version", "report_type", "op",    "model", "target_policy", "behavior_policy",
                    "n_samples",      "value",       "variance", "max_pointwise_deviation"};
  json row = report.new_row();
  row["op"] = op;
  row["model"] = model.id;
  row["target_policy"] = target.id;
  row["behavior_policy"] = json(nullptr);
  row["n_samples"] = json(nullptr);
  row["variance"] = json(nullptr);
  row["max_pointwise_deviation"] = json(nullptr);

  if (op == "exact-value") {
    row["value"] = exact_value(model, target, spec);
  } else if (op == "is-variance") {
    const Policy behavior = io::load_policy(r.req<std::string>(f.behavior_policy, "behavior_policy"));
    const std::int64_t n = r.req<std::int64_t>(f.n_samples, "n_samples");
    row["behavior_policy"] = behavior.id;
    row["n_samples"] = n;
    row["value"] = exact_value(model, target, spec);
    row["variance"] = is_variance_exact(model, target, behavior, spec, n);
  } else if (op == "optimal-sampling") {
    const OptimalSamplingResult res = optimal_sampling_check(model, target, spec);
    const double v = exact_value(model, target, spec);
    // Pointwise identity: every reweighted sample equals V(target).
    double worst = 0.0;
    std::size_t idx = 0;
    for_each_enumerated(model, spec, target, kDefaultEnumerationCap, [&](const EnumeratedHistory& e) {
      const double p_star = res.probabilities[idx++];
      if (p_star > 0.0) {
        const double term = compute_return(e.history, spec) * e.env_prob * e.action_prob / p_star;
        worst = std::max(worst, std::abs(term - v));
      }
    });
    row["value"] = v;
    row["variance"] = res.variance;
    row["max_pointwise_deviation"] = worst;
  } else {
    throw validation_error("unknown oracle op '" + op + "' (exact-value|is-variance|optimal-sampling|enumerate)");
  }
  report.rows.push_back(std::move(row));
  io::save_report(report, resolve_format(r, f), r.opt<std::string>(f.output, "output", ""));
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"off-policy value evaluation in tabular POMDPs"};
  app.require_subcommand(1);

  CommonFlags validate_f, simulate_f, estimate_f, bounds_f, coverage_f, cmp_est_f, cmp_bnd_f, srm_f, oracle_f;
  BoundFlags bound_extra;
  std::optional<std::string> oracle_op;
  bool coverage_emit_deviations = false;

  add_common(app.add_subcommand("validate", "validate model/policy/class/dataset files"), validate_f);
  add_common(app.add_subcommand("simulate", "sampling stage: draw histories and persist the dataset"), simulate_f);
  add_common(app.add_subcommand("estimate", "estimation stage: value query against a persisted dataset"),
             estimate_f);
  auto* bounds_cmd = app.add_subcommand("bounds", "evaluate a deviation / sample-size formula");
  add_common(bounds_cmd, bounds_f);
  bounds_cmd->add_option("--formula", bound_extra.formula,
                         "lemma2-epsilon|theorem2-n|theorem2-epsilon|stated-n|kearns-n|mcdiarmid-n|parametric-n|"
                         "regret|parametric-regret|eta-from-regret|eta");
  bounds_cmd->add_option("--entropy-k", bound_extra.entropy_k, "constant metric entropy K");
  bounds_cmd->add_option("--vc", bound_extra.vc_dim, "VC dimension (kearns-n)");
  bounds_cmd->add_option("--c-floor", bound_extra.c_floor, "probability floor");
  bounds_cmd->add_option("--covering-count", bound_extra.covering_count, "constant covering number");
  bounds_cmd->add_option("--k1", bound_extra.k1, "parametric entropy coefficient k1");
  bounds_cmd->add_option("--k2", bound_extra.k2, "parametric entropy coefficient k2");
  bounds_cmd->add_option("--regret", bound_extra.regret, "regret value (eta-from-regret)");
  bounds_cmd->add_option("--tolerance", bound_extra.tolerance, "integration tolerance (regret)");
  bounds_cmd->add_option("--actions", bound_extra.num_actions, "number of actions (eta)");

  auto* coverage_cmd = app.add_subcommand("coverage", "empirical coverage of the deviation bounds");
  add_common(coverage_cmd, coverage_f);
  coverage_cmd->add_flag("--emit-deviations", coverage_emit_deviations, "one row per replication");

  add_common(app.add_subcommand("compare-estimators", "bias/variance table of the estimators"), cmp_est_f);
  add_common(app.add_subcommand("compare-bounds", "sample-size formulas side by side on a grid"), cmp_bnd_f);
  add_common(app.add_subcommand("srm", "penalized class selection"), srm_f);
  auto* oracle_cmd = app.add_subcommand("oracle", "exact enumeration oracles");
  add_common(oracle_cmd, oracle_f);
  oracle_cmd->add_option("--op", oracle_op, "exact-value|is-variance|optimal-sampling|enumerate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (app.got_subcommand("validate")) return cmd_validate(validate_f);
    if (app.got_subcommand("simulate")) return cmd_simulate(simulate_f);
    if (app.got_subcommand("estimate")) return cmd_estimate(estimate_f);
    if (app.got_subcommand("bounds")) return cmd_bounds(bounds_f, bound_extra);
    if (app.got_subcommand("coverage")) return cmd_coverage(coverage_f, coverage_emit_deviations);
    if (app.got_subcommand("compare-estimators")) return cmd_compare_estimators(cmp_est_f);
    if (app.got_subcommand("compare-bounds")) return cmd_compare_bounds(cmp_bnd_f);
    if (app.got_subcommand("srm")) return cmd_srm(srm_f);
    if (app.got_subcommand("oracle")) return cmd_oracle(oracle_f, oracle_op);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace peval::cli
