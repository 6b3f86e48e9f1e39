#include "peval/io.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "peval/errors.hpp"

namespace peval::io {

namespace {

// Schema and content defects are validation errors (exit 1); io_error is
// reserved for files that cannot be opened or written (exit 3).
[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw validation_error(origin + ": " + msg);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<double> double_vector(const json& j, const std::string& key, const std::string& origin) {
  const json& arr = require_key(j, key, origin);
  if (!arr.is_array()) fail(origin, key + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) fail(origin, key + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<std::vector<double>> double_matrix(const json& arr, const std::string& what, const std::string& origin) {
  if (!arr.is_array()) fail(origin, what + " must be an array");
  std::vector<std::vector<double>> out;
  out.reserve(arr.size());
  for (std::size_t r = 0; r < arr.size(); ++r) {
    const auto& row = arr[r];
    if (!row.is_array()) fail(origin, what + "[" + std::to_string(r) + "] must be an array");
    std::vector<double> vals;
    vals.reserve(row.size());
    for (const auto& v : row) {
      if (!v.is_number()) fail(origin, what + "[" + std::to_string(r) + "] must contain numbers");
      vals.push_back(v.get<double>());
    }
    out.push_back(std::move(vals));
  }
  return out;
}

}  // namespace

const json& require_key(const json& j, const std::string& key, const std::string& origin) {
  if (!j.is_object()) fail(origin, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(origin, "missing field '" + key + "'");
  return *it;
}

double get_double(const json& j, const std::string& key, const std::string& origin) {
  const json& v = require_key(j, key, origin);
  if (!v.is_number()) fail(origin, "field '" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t get_int(const json& j, const std::string& key, const std::string& origin) {
  const json& v = require_key(j, key, origin);
  if (!v.is_number_integer()) fail(origin, "field '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_uint64(const json& j, const std::string& key, const std::string& origin) {
  const json& v = require_key(j, key, origin);
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(origin, "field '" + key + "' must be an integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& origin) {
  const json& v = require_key(j, key, origin);
  if (!v.is_string()) fail(origin, "field '" + key + "' must be a string");
  return v.get<std::string>();
}

void check_format_version(const json& j, const std::string& origin) {
  if (get_int(j, "format_version", origin) != kFormatVersion)
    fail(origin, "unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
}

json parse_string(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Convert the byte offset into a line:column pair.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < e.byte; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << origin << ":" << line << ":" << col << ": " << e.what();
    throw validation_error(os.str());
  }
}

json parse_file(const std::filesystem::path& path) { return parse_string(read_file(path), path.string()); }

// --- pomdp -------------------------------------------------------------

Pomdp pomdp_from_json(const json& j, const std::string& origin) {
  check_format_version(j, origin);
  if (get_string(j, "type", origin) != "pomdp") fail(origin, "type must be 'pomdp'");
  Pomdp m;
  m.num_states = static_cast<int>(get_int(j, "num_states", origin));
  m.num_observations = static_cast<int>(get_int(j, "num_observations", origin));
  m.num_actions = static_cast<int>(get_int(j, "num_actions", origin));
  m.r_max = get_double(j, "r_max", origin);
  if (j.contains("id")) m.id = get_string(j, "id", origin);
  m.initial_dist = double_vector(j, "initial_dist", origin);

  const json& trans = require_key(j, "transition", origin);
  if (!trans.is_array() || trans.size() != static_cast<std::size_t>(m.num_states))
    fail(origin, "transition must be an array with one entry per state");
  for (std::size_t s = 0; s < trans.size(); ++s) {
    const auto rows = double_matrix(trans[s], "transition[" + std::to_string(s) + "]", origin);
    if (rows.size() != static_cast<std::size_t>(m.num_actions))
      fail(origin, "transition[" + std::to_string(s) + "] must have one row per action");
    for (const auto& row : rows) m.transition.push_back(row);
  }
  m.observation_fn = double_matrix(require_key(j, "observation", origin), "observation", origin);
  m.reward = double_matrix(require_key(j, "reward", origin), "reward", origin);
  try {
    validate_pomdp(m);
  } catch (const validation_error& e) {
    fail(origin, e.what());
  }
  return m;
}

json pomdp_to_json(const Pomdp& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["type"] = "pomdp";
  if (!m.id.empty()) j["id"] = m.id;
  j["num_states"] = m.num_states;
  j["num_observations"] = m.num_observations;
  j["num_actions"] = m.num_actions;
  j["r_max"] = m.r_max;
  j["initial_dist"] = m.initial_dist;
  json trans = json::array();
  for (int s = 0; s < m.num_states; ++s) {
    json per_state = json::array();
    for (int a = 0; a < m.num_actions; ++a) per_state.push_back(m.transition_row(s, a));
    trans.push_back(per_state);
  }
  j["transition"] = trans;
  j["observation"] = m.observation_fn;
  j["reward"] = m.reward;
  return j;
}

Pomdp load_pomdp(const std::filesystem::path& path) { return pomdp_from_json(parse_file(path), path.string()); }

void save_pomdp(const Pomdp& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << pomdp_to_json(model).dump(2) << '\n';
}

// --- policy ------------------------------------------------------------

namespace {

PolicyKind kind_from_string(const std::string& s, const std::string& origin) {
  if (s == "tabular_reactive") return PolicyKind::tabular_reactive;
  if (s == "finite_window") return PolicyKind::finite_window;
  if (s == "softmax_parametric") return PolicyKind::softmax_parametric;
  fail(origin, "unknown policy kind '" + s + "'");
}

std::string kind_to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::tabular_reactive: return "tabular_reactive";
    case PolicyKind::finite_window: return "finite_window";
    case PolicyKind::softmax_parametric: return "softmax_parametric";
  }
  return "unknown";
}

}  // namespace

Policy policy_from_json(const json& j, const std::string& origin) {
  check_format_version(j, origin);
  if (get_string(j, "type", origin) != "policy") fail(origin, "type must be 'policy'");
  Policy p;
  p.kind = kind_from_string(get_string(j, "kind", origin), origin);
  p.num_observations = static_cast<int>(get_int(j, "num_observations", origin));
  p.num_actions = static_cast<int>(get_int(j, "num_actions", origin));
  p.window = j.contains("window") ? static_cast<int>(get_int(j, "window", origin)) : 1;
  if (p.kind == PolicyKind::tabular_reactive && p.window != 1)
    fail(origin, "tabular_reactive requires window 1 (use finite_window)");
  p.floor = j.contains("floor") ? get_double(j, "floor", origin) : 0.0;
  if (j.contains("id")) p.id = get_string(j, "id", origin);
  if (p.kind == PolicyKind::softmax_parametric) {
    p.params = double_matrix(require_key(j, "params", origin), "params", origin);
  } else {
    p.table = double_matrix(require_key(j, "table", origin), "table", origin);
  }
  try {
    validate_policy(p);
  } catch (const validation_error& e) {
    fail(origin, e.what());
  }
  return p;
}

json policy_to_json(const Policy& p) {
  json j;
  j["format_version"] = kFormatVersion;
  j["type"] = "policy";
  if (!p.id.empty()) j["id"] = p.id;
  j["kind"] = kind_to_string(p.kind);
  j["num_observations"] = p.num_observations;
  j["num_actions"] = p.num_actions;
  j["window"] = p.window;
  j["floor"] = p.floor;
  if (p.kind == PolicyKind::softmax_parametric)
    j["params"] = p.params;
  else
    j["table"] = p.table;
  return j;
}

Policy load_policy(const std::filesystem::path& path) { return policy_from_json(parse_file(path), path.string()); }

void save_policy(const Policy& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << policy_to_json(p).dump(2) << '\n';
}

// --- policy class --------------------------------------------------------

PolicyClass policy_class_from_json(const json& j, const std::string& origin) {
  check_format_version(j, origin);
  if (get_string(j, "type", origin) != "policy_class") fail(origin, "type must be 'policy_class'");
  PolicyClass cls;
  cls.floor = get_double(j, "floor", origin);
  if (j.contains("id")) cls.id = get_string(j, "id", origin);

  if (j.contains("members")) {
    const json& members = j["members"];
    if (!members.is_array() || members.empty()) fail(origin, "members must be a nonempty array");
    for (std::size_t i = 0; i < members.size(); ++i)
      cls.members.push_back(policy_from_json(members[i], origin + " members[" + std::to_string(i) + "]"));
  } else if (j.contains("axes")) {
    // Softmax logit grid.
    Policy base;
    base.kind = PolicyKind::softmax_parametric;
    base.num_observations = static_cast<int>(get_int(j, "num_observations", origin));
    base.num_actions = static_cast<int>(get_int(j, "num_actions", origin));
    base.window = j.contains("window") ? static_cast<int>(get_int(j, "window", origin)) : 1;
    base.floor = cls.floor;
    base.params.assign(static_cast<std::size_t>(base.num_contexts()),
                       std::vector<double>(static_cast<std::size_t>(base.num_actions), 0.0));
    const json& axes = j["axes"];
    if (!axes.is_array() || axes.empty()) fail(origin, "axes must be a nonempty array");
    struct Axis {
      int context, action, steps;
      double min, max;
    };
    std::vector<Axis> parsed;
    double total = 1.0;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const std::string ax_origin = origin + " axes[" + std::to_string(i) + "]";
      Axis ax;
      ax.context = static_cast<int>(get_int(axes[i], "context", ax_origin));
      ax.action = static_cast<int>(get_int(axes[i], "action", ax_origin));
      ax.steps = static_cast<int>(get_int(axes[i], "steps", ax_origin));
      ax.min = get_double(axes[i], "min", ax_origin);
      ax.max = get_double(axes[i], "max", ax_origin);
      if (ax.steps < 1) fail(ax_origin, "steps must be >= 1");
      if (ax.context < 0 || ax.context >= base.num_contexts()) fail(ax_origin, "context out of range");
      if (ax.action < 0 || ax.action >= base.num_actions) fail(ax_origin, "action out of range");
      total *= ax.steps;
      parsed.push_back(ax);
    }
    if (total > 1e4) fail(origin, "grid would expand to more than 1e4 members");
    std::vector<int> idx(parsed.size(), 0);
    std::size_t member = 0;
    while (true) {
      Policy p = base;
      for (std::size_t i = 0; i < parsed.size(); ++i) {
        const Axis& ax = parsed[i];
        const double v =
            ax.steps == 1 ? ax.min : ax.min + (ax.max - ax.min) * idx[i] / static_cast<double>(ax.steps - 1);
        p.params[ax.context][ax.action] = v;
      }
      p.id = cls.id + "#" + std::to_string(member++);
      cls.members.push_back(std::move(p));
      std::size_t k = 0;
      while (k < idx.size()) {
        if (++idx[k] < parsed[k].steps) break;
        idx[k] = 0;
        ++k;
      }
      if (k == idx.size()) break;
    }
  } else {
    fail(origin, "policy_class needs either 'members' or 'axes'");
  }

  if (j.contains("context_space")) {
    for (const auto& v : j["context_space"]) {
      if (!v.is_number_integer()) fail(origin, "context_space must contain integers");
      cls.context_space.push_back(v.get<int>());
    }
  } else {
    cls.context_space = all_contexts(cls.members.front().num_observations, cls.members.front().window);
  }
  try {
    validate_policy_class(cls);
  } catch (const validation_error& e) {
    fail(origin, e.what());
  }
  return cls;
}

PolicyClass load_policy_class(const std::filesystem::path& path) {
  return policy_class_from_json(parse_file(path), path.string());
}

// --- return spec -----------------------------------------------------------

ReturnSpec return_spec_from_json(const json& j, const std::string& origin) {
  ReturnSpec spec;
  const std::string kind = get_string(j, "kind", origin);
  if (kind == "finite_horizon")
    spec.kind = ReturnKind::finite_horizon;
  else if (kind == "discounted")
    spec.kind = ReturnKind::discounted;
  else
    fail(origin, "return kind must be 'finite_horizon' or 'discounted'");
  spec.horizon = static_cast<int>(get_int(j, "horizon", origin));
  spec.r_max = get_double(j, "r_max", origin);
  if (spec.kind == ReturnKind::discounted) spec.gamma = get_double(j, "gamma", origin);
  try {
    validate_return_spec(spec);
  } catch (const validation_error& e) {
    fail(origin, e.what());
  }
  return spec;
}

json return_spec_to_json(const ReturnSpec& spec) {
  json j;
  j["kind"] = spec.kind == ReturnKind::finite_horizon ? "finite_horizon" : "discounted";
  j["horizon"] = spec.horizon;
  if (spec.kind == ReturnKind::discounted) j["gamma"] = spec.gamma;
  j["r_max"] = spec.r_max;
  return j;
}

// --- dataset -----------------------------------------------------------

void write_dataset(const SampleSet& samples, const std::optional<Policy>& behavior, std::ostream& os) {
  json header;
  header["format_version"] = kFormatVersion;
  header["type"] = "peval_dataset";
  header["behavior_policy_id"] = samples.behavior_policy_id;
  header["return_spec"] = return_spec_to_json(samples.spec);
  header["master_seed"] = samples.master_seed;
  header["n"] = samples.histories.size();
  if (behavior) header["behavior_policy"] = policy_to_json(*behavior);
  os << header.dump() << '\n';
  for (std::size_t i = 0; i < samples.histories.size(); ++i) {
    const History& h = samples.histories[i];
    json line;
    json o = json::array(), a = json::array(), r = json::array();
    for (const HistoryStep& s : h.steps) {
      o.push_back(s.observation);
      a.push_back(s.action);
      r.push_back(s.reward);
    }
    line["o"] = std::move(o);
    line["a"] = std::move(a);
    line["r"] = std::move(r);
    line["bp"] = h.behavior_probs;
    line["seed"] = i < samples.trajectory_seeds.size() ? samples.trajectory_seeds[i] : 0;
    os << line.dump() << '\n';
  }
}

void save_dataset(const SampleSet& samples, const std::optional<Policy>& behavior,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  write_dataset(samples, behavior, out);
}

Dataset read_dataset(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) fail(origin, "empty dataset");
  const json header = parse_string(line, origin + ":1");
  check_format_version(header, origin);
  if (get_string(header, "type", origin) != "peval_dataset") fail(origin, "type must be 'peval_dataset'");
  Dataset ds;
  ds.samples.behavior_policy_id = get_string(header, "behavior_policy_id", origin);
  ds.samples.spec = return_spec_from_json(require_key(header, "return_spec", origin), origin);
  ds.samples.master_seed = get_uint64(header, "master_seed", origin);
  if (header.contains("behavior_policy"))
    ds.behavior = policy_from_json(header["behavior_policy"], origin + " behavior_policy");
  const std::size_t n = static_cast<std::size_t>(get_int(header, "n", origin));

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string rec_origin = origin + ":" + std::to_string(line_no);
    const json rec = parse_string(line, rec_origin);
    try {
      const json& o = require_key(rec, "o", rec_origin);
      const json& a = require_key(rec, "a", rec_origin);
      const json& r = require_key(rec, "r", rec_origin);
      const json& bp = require_key(rec, "bp", rec_origin);
      if (o.size() != a.size() || o.size() != r.size() || o.size() != bp.size())
        fail(rec_origin, "o/a/r/bp lengths disagree");
      History h;
      for (std::size_t t = 0; t < o.size(); ++t)
        h.steps.push_back({o[t].get<int>(), a[t].get<int>(), r[t].get<double>()});
      h.behavior_probs = bp.get<std::vector<double>>();
      ds.samples.histories.push_back(std::move(h));
      ds.samples.trajectory_seeds.push_back(rec.contains("seed") ? rec["seed"].get<std::uint64_t>() : 0);
    } catch (const nlohmann::json::exception& e) {
      fail(rec_origin, e.what());
    }
  }
  if (ds.samples.histories.size() != n) {
    std::ostringstream os;
    os << "header announces " << n << " histories but " << ds.samples.histories.size() << " records follow";
    fail(origin, os.str());
  }
  ds.samples.returns.reserve(n);
  for (const History& h : ds.samples.histories) ds.samples.returns.push_back(compute_return(h, ds.samples.spec));
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  return read_dataset(in, path.string());
}

// --- reports -----------------------------------------------------------

json Report::new_row() const {
  json row;
  row["format_version"] = kFormatVersion;
  row["report_type"] = type;
  return row;
}

namespace {

std::string csv_field(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

void write_report_csv(const Report& report, std::ostream& os) {
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    if (c > 0) os << ',';
    os << report.columns[c];
  }
  os << '\n';
  for (const json& row : report.rows) {
    for (std::size_t c = 0; c < report.columns.size(); ++c) {
      if (c > 0) os << ',';
      const auto it = row.find(report.columns[c]);
      if (it != row.end() && !it->is_null()) os << csv_field(*it);
    }
    os << '\n';
  }
}

void write_report_json(const Report& report, std::ostream& os) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["report_type"] = report.type;
  doc["columns"] = report.columns;
  doc["rows"] = report.rows;
  os << doc.dump(2) << '\n';
}

void save_report(const Report& report, const std::string& format, const std::string& path) {
  std::ostream* os = nullptr;
  std::ofstream file;
  if (path.empty()) {
    os = &std::cout;
  } else {
    file.open(path, std::ios::binary);
    if (!file) throw io_error("cannot write " + path);
    os = &file;
  }
  if (format == "csv")
    write_report_csv(report, *os);
  else if (format == "json")
    write_report_json(report, *os);
  else
    throw validation_error("unknown report format '" + format + "' (use csv or json)");
}

}  // namespace peval::io
