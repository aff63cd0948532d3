#include "mmr/config.hpp"

#include <set>

#include "mmr/io.hpp"

namespace mmr {

namespace {

using nlohmann::json;

/// Walks one JSON object, remembering which keys were read so that leftovers
/// can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  /// Rejects keys that were never read.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(key, std::string("wrong type (") + e.what() + ")");
    }
  }

  bool has(const char* key) const {
    const auto it = j_.find(key);
    return it != j_.end() && !it->is_null();
  }

  const json* object(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string where = key.empty() ? (path_.empty() ? "<root>" : path_)
                                          : (path_.empty() ? key : path_ + "." + key);
    throw ConfigError("config: field '" + where + "': " + msg);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError("config: field '" + field + "': " + msg);
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void read_data(const json& j, DataSpec& d) {
  Fields f(j, "data");
  f.read("source", d.source);
  f.read("n_classes", d.n_classes);
  f.read("dim", d.dim);
  f.read("per_class", d.per_class);
  f.read("center_radius", d.center_radius);
  f.read("sigma", d.sigma);
  f.read("seed", d.seed);
  f.read("path", d.path);
  f.read("label_column", d.label_column);
  f.finish();
  require(d.source == "blobs" || d.source == "csv", "data.source", "must be \"blobs\" or \"csv\"");
  if (d.source == "blobs") {
    require(d.n_classes >= 2, "data.n_classes", "must be at least 2");
    require(d.dim >= 2, "data.dim", "must be at least 2");
    require(d.per_class >= 1, "data.per_class", "must be at least 1");
    require(d.sigma > 0.0, "data.sigma", "must be positive");
  } else {
    require(!d.path.empty(), "data.path", "required when source is \"csv\"");
  }
}

void read_split(const json& j, RunConfig& c) {
  Fields f(j, "split");
  f.read("train", c.split[0]);
  f.read("validation", c.split[1]);
  f.read("test", c.split[2]);
  f.read("seed", c.split_seed);
  f.finish();
  require(c.split[0] > 0.0 && c.split[1] >= 0.0 && c.split[2] >= 0.0, "split",
          "fractions must be non-negative with a positive training share");
  require(std::abs(c.split[0] + c.split[1] + c.split[2] - 1.0) <= 1e-9, "split",
          "fractions must sum to 1");
}

void read_policy(const json& j, SelectionPolicy& p) {
  Fields f(j, "policy");
  std::string kind = to_string(p.kind);
  f.read("kind", kind);
  try {
    p.kind = policy_from_string(kind);
  } catch (const Error& e) {
    f.fail("kind", e.what());
  }
  f.read("pool_size", p.pool_size);
  f.read("batch_size", p.batch_size);
  f.finish();
  require(p.batch_size >= 1, "policy.batch_size", "must be at least 1");
  require(p.batch_size <= p.pool_size, "policy.batch_size",
          "must not exceed policy.pool_size (b <= B), got b=" + std::to_string(p.batch_size) +
              " B=" + std::to_string(p.pool_size));
}

void read_lr(const json& j, LrSchedule& lr) {
  Fields f(j, "lr");
  std::vector<std::size_t> drops = lr.drop_steps;
  f.read("drop_steps", drops);
  if (f.has("drop_factors") || f.has("base")) {
    require(!f.has("rates"), "lr", "give either rates or base + drop_factors, not both");
    double base = lr.base_lr();
    std::vector<double> factors;
    f.read("base", base);
    f.read("drop_factors", factors);
    f.finish();
    require(factors.size() == drops.size(), "lr.drop_factors", "need one factor per drop step");
    try {
      lr = LrSchedule::from_factors(base, drops, factors);
    } catch (const Error& e) {
      f.fail("", e.what());
    }
    return;
  }
  f.read("rates", lr.rates);
  f.finish();
  lr.drop_steps = drops;
  try {
    lr.validate();
  } catch (const Error& e) {
    f.fail("", e.what());
  }
}

void read_alpha(const json& j, AlphaSchedule& a) {
  Fields f(j, "alpha");
  std::string mode = a.mode == AlphaSchedule::Mode::constant ? "constant" : "linear";
  f.read("mode", mode);
  require(mode == "constant" || mode == "linear", "alpha.mode", "must be \"constant\" or \"linear\"");
  a.mode = mode == "constant" ? AlphaSchedule::Mode::constant : AlphaSchedule::Mode::linear;
  f.read("start", a.start);
  a.end = a.start;
  f.read("end", a.end);
  f.read("total_steps", a.total_steps);
  f.finish();
  require(a.start >= 0.0 && a.end >= 0.0, "alpha", "values must be non-negative");
}

}  // namespace

RunConfig default_run_config() {
  RunConfig c;
  c.train.policy = SelectionPolicy{PolicyKind::mms, 160, 16};
  c.train.lr = LrSchedule::constant(0.1);
  c.train.alpha = AlphaSchedule{AlphaSchedule::Mode::constant, 1e-5, 1e-5, 0};
  c.train.total_steps = 500;
  c.train.eval_interval = 50;
  c.train.seed = 1;
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: JSON syntax error at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) +
                      ": " + e.what());
  }

  RunConfig c = default_run_config();
  TrainConfig& t = c.train;
  {
    Fields f(j, "");
    if (const json* d = f.object("data")) read_data(*d, c.data);
    if (const json* s = f.object("split")) read_split(*s, c);
    f.read("standardize", c.standardize);
    if (const json* m = f.object("model")) {
      Fields mf(*m, "model");
      mf.read("hidden", c.hidden);
      mf.finish();
      for (auto h : c.hidden) require(h >= 1, "model.hidden", "layer widths must be positive");
    }
    if (const json* p = f.object("policy")) read_policy(*p, t.policy);
    if (const json* l = f.object("lr")) read_lr(*l, t.lr);
    if (const json* a = f.object("alpha")) read_alpha(*a, t.alpha);
    if (const json* m = f.object("mmr")) {
      Fields mf(*m, "mmr");
      mf.read("enabled", t.mmr_enabled);
      mf.read("feature_grad", t.mmr_feature_grad);
      mf.finish();
    }
    std::string loss = to_string(t.loss);
    f.read("loss", loss);
    try {
      t.loss = loss_mode_from_string(loss);
    } catch (const Error& e) {
      f.fail("loss", e.what());
    }
    f.read("total_steps", t.total_steps);
    f.read("eval_interval", t.eval_interval);
    f.read("seed", t.seed);
    f.read("momentum", t.momentum);
    double target = -1.0;
    f.read("target_accuracy", target);
    if (f.has("target_accuracy")) {
      require(target >= 0.0 && target <= 1.0, "target_accuracy", "must be in [0, 1]");
      t.target_accuracy = target;
    }
    f.read("stop_at_target", t.stop_at_target);
    f.read("selection_log", t.selection_log);
    f.read("checkpoint_interval", c.checkpoint_interval);
    f.read("out_dir", c.out_dir);
    f.finish();
  }
  require(t.eval_interval >= 1, "eval_interval", "must be at least 1");
  require(t.momentum >= 0.0 && t.momentum < 1.0, "momentum", "must be in [0, 1)");
  if (t.alpha.mode == AlphaSchedule::Mode::linear && t.alpha.total_steps == 0) {
    t.alpha.total_steps = t.total_steps;
  }
  try {
    t.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_run_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json data = {{"source", c.data.source}};
  if (c.data.source == "blobs") {
    data.update({{"n_classes", c.data.n_classes},
                 {"dim", c.data.dim},
                 {"per_class", c.data.per_class},
                 {"center_radius", c.data.center_radius},
                 {"sigma", c.data.sigma},
                 {"seed", c.data.seed}});
  } else {
    data.update({{"path", c.data.path}, {"label_column", c.data.label_column}});
  }
  return json{
      {"data", data},
      {"split",
       {{"train", c.split[0]}, {"validation", c.split[1]}, {"test", c.split[2]}, {"seed", c.split_seed}}},
      {"standardize", c.standardize},
      {"model", {{"hidden", c.hidden}}},
      {"policy",
       {{"kind", to_string(t.policy.kind)},
        {"pool_size", t.policy.pool_size},
        {"batch_size", t.policy.batch_size}}},
      {"lr", {{"rates", t.lr.rates}, {"drop_steps", t.lr.drop_steps}}},
      {"alpha",
       {{"mode", t.alpha.mode == AlphaSchedule::Mode::constant ? "constant" : "linear"},
        {"start", t.alpha.start},
        {"end", t.alpha.end},
        {"total_steps", t.alpha.total_steps}}},
      {"mmr", {{"enabled", t.mmr_enabled}, {"feature_grad", t.mmr_feature_grad}}},
      {"loss", to_string(t.loss)},
      {"total_steps", t.total_steps},
      {"eval_interval", t.eval_interval},
      {"seed", t.seed},
      {"momentum", t.momentum},
      {"target_accuracy", t.target_accuracy ? json(*t.target_accuracy) : json(nullptr)},
      {"stop_at_target", t.stop_at_target},
      {"selection_log", t.selection_log},
      {"checkpoint_interval", c.checkpoint_interval},
      {"out_dir", c.out_dir},
  };
}

Split prepare_data(const RunConfig& config) {
  const DataSpec& d = config.data;
  Dataset all = d.source == "csv"
                    ? load_csv(d.path, d.label_column)
                    : gen_blobs(d.n_classes, d.dim, d.per_class, d.center_radius, d.sigma, d.seed);
  Split split = split_shuffle(all, config.split, config.split_seed);
  if (config.standardize) standardize(split.train, {&split.validation, &split.test});
  return split;
}

}  // namespace mmr
