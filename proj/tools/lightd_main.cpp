#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lightd/config.hpp"
#include "lightd/error.hpp"
#include "lightd/gradcheck.hpp"
#include "lightd/harness.hpp"
#include "lightd/lightgen.hpp"
#include "lightd/metrics/caption.hpp"
#include "lightd/metrics/niqe.hpp"
#include "lightd/png.hpp"
#include "lightd/synthetic.hpp"

namespace fs = std::filesystem;
using namespace lightd;

namespace {

std::pair<int, int> parse_size(const std::string& s) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw_invalid("size must look like HxW, got " + s);
  return {std::stoi(m[1]), std::stoi(m[2])};
}

std::vector<fs::path> png_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct AttackArgs {
  std::string config, manifest, out, backend, endpoint;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

int cmd_attack(const AttackArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (!a.backend.empty()) {
    const auto k = parse_backend_kind(a.backend);
    if (!k) throw_invalid("--backend must be surrogate or remote");
    cfg.backend.kind = *k;
  }
  if (!a.endpoint.empty()) cfg.backend.endpoint = a.endpoint;
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  cfg.validate();

  const auto records = load_manifest(a.manifest);
  if (cfg.backend.kind == BackendKind::kRemote) {
    // fail before any record is attempted if the server is down
    const auto h = probe_health({cfg.backend.endpoint, cfg.backend.timeout, 1});
    std::printf("model server %s: %s\n", cfg.backend.endpoint.c_str(), h.status.c_str());
  }
  const Backends backends = make_backends(cfg);
  RunReport report = run_batch(cfg, records, backends);
  write_report(report, a.out);

  std::printf("records: %zu  failed: %zu\n", report.records.size(), report.failed);
  for (const auto& r : report.records) {
    if (!r.ok) std::fprintf(stderr, "  %s: %s\n", r.id.c_str(), r.error.c_str());
  }
  for (const auto& [k, v] : report.aggregates) std::printf("  %-18s %.6f\n", k.c_str(), v);
  std::printf("wrote %s\n", (fs::path(a.out) / "report.json").string().c_str());
  return 0;
}

int cmd_lightgen(const std::string& start, const std::string& end, const std::string& dir,
                 double weight, const std::string& size, const std::string& out) {
  LightingParams p;
  const auto s = parse_hex_color(start);
  const auto e = parse_hex_color(end);
  if (!s || !e) throw_invalid("colors must be #RRGGBB");
  const auto d = parse_direction(dir);
  if (!d) throw_invalid("unknown direction " + dir);
  p.start_color = *s;
  p.end_color = *e;
  p.direction = *d;
  p.weight = weight;
  if (!p.valid()) throw_invalid("weight must be in [0, 2]");
  const auto [h, w] = parse_size(size);
  write_png(out, generate_lighting_image(p, h, w));
  return 0;
}

int cmd_eval_captions(const std::string& fixtures, bool as_json) {
  std::ifstream in(fixtures);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + fixtures);
  std::vector<metrics::TokenSeq> cands;
  std::vector<std::vector<metrics::TokenSeq>> refs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("candidate") || !j["candidate"].is_string() ||
        !j.contains("references") || !j["references"].is_array() ||
        j["references"].empty()) {
      throw Error(ErrorCode::kParseError,
                  fixtures + " line " + std::to_string(line_no) +
                      ": expected {id, candidate, references[]}");
    }
    cands.push_back(metrics::tokenize(j["candidate"].get<std::string>()));
    std::vector<metrics::TokenSeq> r;
    for (const auto& ref : j["references"]) r.push_back(metrics::tokenize(ref.get<std::string>()));
    refs.push_back(std::move(r));
  }
  if (cands.empty()) throw_invalid("no fixtures in " + fixtures);
  double rouge = 0.0;
  for (std::size_t i = 0; i < cands.size(); ++i) rouge += metrics::rouge_l(cands[i], refs[i]);
  rouge /= static_cast<double>(cands.size());
  const double b = metrics::bleu(cands, refs);
  const double c = metrics::cider(cands, refs, refs);
  if (as_json) {
    std::cout << nlohmann::json{{"count", cands.size()}, {"bleu", b}, {"rouge_l", rouge},
                                {"cider", c}}.dump(2)
              << "\n";
  } else {
    std::printf("count    %zu\nbleu     %.6f\nrouge_l  %.6f\ncider    %.6f\n", cands.size(), b,
                rouge, c);
  }
  return 0;
}

int cmd_niqe_fit(const std::string& dir, const std::string& out, int patch, double thr) {
  std::vector<Image> imgs;
  for (const auto& p : png_files(dir)) imgs.push_back(read_png(p));
  metrics::NiqeOptions opts;
  opts.patch_size = patch;
  opts.sharpness_threshold = thr;
  const auto model = metrics::niqe_fit(imgs, opts);
  metrics::save_niqe_model(out, model);
  std::printf("fitted on %zu images, %zu patches -> %s\n", model.meta.corpus_size,
              model.meta.patch_count, out.c_str());
  return 0;
}

int cmd_niqe_score(const std::string& model_path, const std::string& image) {
  const auto model = metrics::load_niqe_model(model_path);
  std::printf("%.6f\n", metrics::niqe_score(model, read_png(image)));
  return 0;
}

int cmd_check_grad(const std::string& module, std::uint64_t seed, int instances) {
  std::vector<GradCheckReport> reps;
  if (module == "all") reps = check_all_gradients(seed, instances);
  else if (module == "lightgen") reps.push_back(check_lightgen_grad(seed, instances));
  else if (module == "relight") reps.push_back(check_relight_grad(seed, instances));
  else if (module == "victim") reps.push_back(check_victim_grad(seed, instances));
  else throw_invalid("--module must be lightgen, relight, victim or all");
  bool ok = true;
  for (const auto& r : reps) {
    std::printf("%-4s %-9s instances=%d max_rel_error=%.3e tol=%.0e\n",
                r.passed() ? "PASS" : "FAIL", r.module.c_str(), r.instances,
                r.max_rel_error, r.tolerance);
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}

int cmd_synth(const std::string& out, int count, const std::string& size, std::uint64_t seed) {
  const auto [h, w] = parse_size(size);
  fs::create_directories(out);
  std::ofstream manifest(fs::path(out) / "manifest.jsonl");
  if (!manifest) throw Error(ErrorCode::kIoError, "cannot write manifest in " + out);
  for (int i = 0; i < count; ++i) {
    const auto scene = synthetic_scene(seed + static_cast<std::uint64_t>(i), h, w);
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", i);
    const std::string file = std::string(id) + ".png";
    write_png(fs::path(out) / file, scene.image);
    manifest << nlohmann::json{{"id", id},
                               {"image_path", file},
                               {"captions", scene.captions},
                               {"question", scene.question},
                               {"answer", scene.answer}}.dump()
             << "\n";
  }
  std::printf("wrote %d scenes to %s\n", count, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lightd: adversarial relighting toolkit"};
  app.require_subcommand(1);

  AttackArgs attack;
  auto* a = app.add_subcommand("attack", "Run the relighting attack over a manifest");
  a->add_option("--config", attack.config, "TOML run configuration")->required()->check(CLI::ExistingFile);
  a->add_option("--manifest", attack.manifest, "JSON-lines dataset manifest")->required()->check(CLI::ExistingFile);
  a->add_option("--out", attack.out, "Output directory")->required();
  a->add_option("--backend", attack.backend, "surrogate | remote");
  a->add_option("--endpoint", attack.endpoint, "Model server URL for remote mode");
  a->add_option("--seed", attack.seed, "Master seed");
  a->add_option("--workers", attack.workers, "Worker threads");

  std::string lg_start, lg_end, lg_dir = "left_to_right", lg_size, lg_out;
  double lg_weight = 1.0;
  auto* g = app.add_subcommand("lightgen", "Render a lighting image");
  g->add_option("--start", lg_start, "#RRGGBB")->required();
  g->add_option("--end", lg_end, "#RRGGBB")->required();
  g->add_option("--direction", lg_dir, "left_to_right | right_to_left | top_to_bottom | bottom_to_top");
  g->add_option("--weight", lg_weight, "Start-color band weight in [0, 2]");
  g->add_option("--size", lg_size, "HxW")->required();
  g->add_option("--out", lg_out, "Output PNG")->required();

  std::string fixtures;
  bool eval_json = false;
  auto* ec = app.add_subcommand("eval-captions", "BLEU / ROUGE-L / CIDEr over caption fixtures");
  ec->add_option("--fixtures", fixtures, "JSON lines {id, candidate, references[]}")->required()->check(CLI::ExistingFile);
  ec->add_flag("--json", eval_json, "Print JSON");

  std::string nf_dir, nf_out;
  int nf_patch = 96;
  double nf_thr = 0.75;
  auto* nf = app.add_subcommand("niqe-fit", "Fit a NIQE model to a directory of pristine PNGs");
  nf->add_option("--images", nf_dir)->required()->check(CLI::ExistingDirectory);
  nf->add_option("--out", nf_out)->required();
  nf->add_option("--patch-size", nf_patch);
  nf->add_option("--sharpness-threshold", nf_thr);

  std::string ns_model, ns_image;
  auto* ns = app.add_subcommand("niqe-score", "Score an image against a NIQE model");
  ns->add_option("--model", ns_model)->required()->check(CLI::ExistingFile);
  ns->add_option("--image", ns_image)->required()->check(CLI::ExistingFile);

  std::string cg_module = "all";
  std::uint64_t cg_seed = 1;
  int cg_instances = 20;
  auto* cg = app.add_subcommand("check-grad", "Finite-difference gradient checks");
  cg->add_option("--module", cg_module, "lightgen | relight | victim | all");
  cg->add_option("--seed", cg_seed);
  cg->add_option("--instances", cg_instances);

  std::string sc_out, sc_size = "64x64";
  int sc_count = 20;
  std::uint64_t sc_seed = 1000;
  auto* sc = app.add_subcommand("synth-corpus", "Write synthetic scenes and a manifest");
  sc->add_option("--out", sc_out)->required();
  sc->add_option("--count", sc_count);
  sc->add_option("--size", sc_size, "HxW");
  sc->add_option("--seed", sc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*a) return cmd_attack(attack);
    if (*g) return cmd_lightgen(lg_start, lg_end, lg_dir, lg_weight, lg_size, lg_out);
    if (*ec) return cmd_eval_captions(fixtures, eval_json);
    if (*nf) return cmd_niqe_fit(nf_dir, nf_out, nf_patch, nf_thr);
    if (*ns) return cmd_niqe_score(ns_model, ns_image);
    if (*cg) return cmd_check_grad(cg_module, cg_seed, cg_instances);
    if (*sc) return cmd_synth(sc_out, sc_count, sc_size, sc_seed);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
