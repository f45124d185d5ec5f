#include "lightd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lightd/error.hpp"
#include "toml.hpp"

namespace lightd {
namespace {

[[noreturn]] void config_fail(const std::string& message) {
  throw Error(ErrorCode::kParseError, "config: " + message);
}

std::string qualify(const std::string& where, std::string_view key) {
  return where.empty() ? std::string(key) : where + "." + std::string(key);
}

void check_keys(const toml::table& t, const std::string& where,
                const std::set<std::string>& allowed) {
  for (const auto& [key, node] : t) {
    const std::string k(key.str());
    if (k == "api_key" || k == "key" || k == "token") {
      config_fail(qualify(where, k) + ": secrets are not read from config; set api_key_env instead");
    }
    if (!allowed.contains(k)) config_fail("unknown key " + qualify(where, k));
  }
}

const toml::table* subtable(const toml::table& t, std::string_view key,
                            const std::string& where) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) config_fail(qualify(where, key) + " must be a table");
  return n->as_table();
}

template <typename T>
std::optional<T> get(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (n == nullptr) return std::nullopt;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;  // integers convert too
  } else if constexpr (std::is_same_v<T, bool>) {
    if (n->is_boolean()) return n->value<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (n->is_string()) return n->value<std::string>();
  } else {
    if (n->is_integer()) {
      const auto v = *n->value<std::int64_t>();
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) config_fail(qualify(where, key) + " must be non-negative");
      }
      return static_cast<T>(v);
    }
  }
  config_fail(qualify(where, key) + " has the wrong type");
}

template <typename T>
void read(const toml::table& t, std::string_view key, const std::string& where, T& out) {
  if (auto v = get<T>(t, key, where)) out = *v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_attack(const toml::table& t, AttackConfig& a) {
  check_keys(t, "attack",
             {"param_step", "image_step", "param_iters", "image_iters", "resize_count",
              "scale_factors", "keep_best"});
  read(t, "param_step", "attack", a.param_step);
  read(t, "image_step", "attack", a.image_step);
  read(t, "param_iters", "attack", a.param_iters);
  read(t, "image_iters", "attack", a.image_iters);
  read(t, "resize_count", "attack", a.resize_count);
  read(t, "keep_best", "attack", a.keep_best);
  if (const toml::node* n = t.get("scale_factors")) {
    const toml::array* arr = n->as_array();
    if (arr == nullptr) config_fail("attack.scale_factors must be an array");
    a.scale_factors.clear();
    for (const toml::node& e : *arr) {
      const auto v = e.value<double>();
      if (!v) config_fail("attack.scale_factors entries must be numbers");
      a.scale_factors.push_back(*v);
    }
  }
}

void read_embedder(const toml::table& t, const std::string& where, EmbedderConfig& e) {
  check_keys(t, where, {"patch_size", "embed_dim", "image_seed", "text_seed"});
  read(t, "patch_size", where, e.patch_size);
  read(t, "embed_dim", where, e.embed_dim);
  read(t, "image_seed", where, e.image_seed);
  read(t, "text_seed", where, e.text_seed);
}

void read_backend(const toml::table& t, BackendConfig& b) {
  check_keys(t, "backend", {"kind", "endpoint", "timeout_ms", "max_in_flight", "surrogate"});
  if (auto kind = get<std::string>(t, "kind", "backend")) {
    const auto k = parse_backend_kind(*kind);
    if (!k) config_fail("backend.kind must be \"surrogate\" or \"remote\"");
    b.kind = *k;
  }
  read(t, "endpoint", "backend", b.endpoint);
  if (auto ms = get<std::int64_t>(t, "timeout_ms", "backend")) {
    b.timeout = std::chrono::milliseconds(*ms);
  }
  read(t, "max_in_flight", "backend", b.max_in_flight);
  if (const toml::table* s = subtable(t, "surrogate", "backend")) {
    const std::string where = "backend.surrogate";
    check_keys(*s, where, {"relight_floor", "relight_gain", "nat_weight", "match", "naturalness"});
    read(*s, "relight_floor", where, b.relight.floor);
    read(*s, "relight_gain", where, b.relight.gain);
    read(*s, "nat_weight", where, b.victim.nat_weight);
    if (const toml::table* m = subtable(*s, "match", where)) {
      read_embedder(*m, where + ".match", b.victim.match);
    }
    if (const toml::table* m = subtable(*s, "naturalness", where)) {
      read_embedder(*m, where + ".naturalness", b.victim.naturalness);
    }
  }
}

void read_recommender(const toml::table& t, const std::filesystem::path& base,
                      RecommenderConfig& r) {
  check_keys(t, "recommender",
             {"endpoint", "model", "api_key_env", "timeout_ms", "max_in_flight",
              "attach_image", "prompt_template_file"});
  auto endpoint = get<std::string>(t, "endpoint", "recommender");
  if (!endpoint || endpoint->empty()) {
    if (t.size() > 0 && !endpoint) {
      config_fail("recommender settings given without recommender.endpoint");
    }
    return;
  }
  LlmEndpointConfig llm;
  llm.url = *endpoint;
  read(t, "model", "recommender", llm.model);
  read(t, "api_key_env", "recommender", llm.api_key_env);
  if (auto ms = get<std::int64_t>(t, "timeout_ms", "recommender")) {
    llm.timeout = std::chrono::milliseconds(*ms);
  }
  read(t, "max_in_flight", "recommender", llm.max_in_flight);
  read(t, "attach_image", "recommender", llm.attach_image);
  if (auto file = get<std::string>(t, "prompt_template_file", "recommender")) {
    const auto path = resolve(base, *file);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::kIoError, "config: cannot read prompt template " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    llm.prompt_template = ss.str();
  }
  r.llm = std::move(llm);
}

}  // namespace

std::string_view to_string(BackendKind k) {
  return k == BackendKind::kSurrogate ? "surrogate" : "remote";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  if (name == "surrogate") return BackendKind::kSurrogate;
  if (name == "remote") return BackendKind::kRemote;
  return std::nullopt;
}

void RunConfig::validate() const {
  attack.validate();
  if (workers < 1) throw_invalid("config: workers must be >= 1");
  if (backend.kind == BackendKind::kRemote && backend.endpoint.empty()) {
    throw_invalid("config: remote backend needs an endpoint");
  }
  if (backend.timeout.count() <= 0 || backend.max_in_flight < 1) {
    throw_invalid("config: backend timeout and max_in_flight must be positive");
  }
  if (!backend.relight.valid()) {
    throw_invalid("config: surrogate relight needs floor, gain >= 0 and floor + gain <= 1");
  }
}

RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "line " << e.source().begin.line << ": " << e.description();
    config_fail(msg.str());
  }
  check_keys(root, "", {"seed", "workers", "niqe_model", "attack", "backend", "recommender"});

  RunConfig cfg;
  read(root, "seed", "", cfg.seed);
  read(root, "workers", "", cfg.workers);
  if (auto m = get<std::string>(root, "niqe_model", "")) cfg.niqe_model = resolve(base_dir, *m);
  if (const toml::table* t = subtable(root, "attack", "")) read_attack(*t, cfg.attack);
  if (const toml::table* t = subtable(root, "backend", "")) read_backend(*t, cfg.backend);
  if (const toml::table* t = subtable(root, "recommender", "")) {
    read_recommender(*t, base_dir, cfg.recommender);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace lightd
