#include "lightd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "lightd/error.hpp"
#include "lightd/metrics/caption.hpp"
#include "lightd/png.hpp"
#include "lightd/rng.hpp"

namespace lightd {
namespace {

using nlohmann::json;

constexpr std::string_view kReportFormat = "lightd-report/1";

[[noreturn]] void manifest_fail(std::size_t line, const std::string& message) {
  throw Error(ErrorCode::kParseError,
              "manifest line " + std::to_string(line) + ": " + message);
}

std::string required_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) manifest_fail(line, std::string("missing \"") + key + "\"");
  if (!j[key].is_string()) manifest_fail(line, std::string("\"") + key + "\" must be a string");
  return j[key].get<std::string>();
}

std::optional<std::string> optional_string(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) manifest_fail(line, std::string("\"") + key + "\" must be a string");
  return j[key].get<std::string>();
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, std::string("cannot read ") + what + " " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

json params_json(const LightingParams& p) {
  return {{"start_color", p.start_color},
          {"end_color", p.end_color},
          {"direction", std::string(to_string(p.direction))},
          {"weight", p.weight}};
}

LightingParams params_from_json(const json& j) {
  LightingParams p;
  p.start_color = j.at("start_color").get<Rgb>();
  p.end_color = j.at("end_color").get<Rgb>();
  const auto d = parse_direction(j.at("direction").get<std::string>());
  if (!d) throw Error(ErrorCode::kParseError, "report: unknown direction");
  p.direction = *d;
  p.weight = j.at("weight").get<double>();
  return p;
}

json loss_json(const LossBreakdown& l) {
  return {{"total", l.total}, {"match_term", l.match_term}, {"nat_term", l.nat_term}};
}

LossBreakdown loss_from_json(const json& j) {
  return {j.at("total").get<double>(), j.at("match_term").get<double>(),
          j.at("nat_term").get<double>()};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Metric columns, in CSV order.
const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "initial_j",     "final_j",     "j_gain",       "final_match_term",
      "final_nat_term", "bleu_clean", "bleu_adv",     "rouge_l_clean",
      "rouge_l_adv",   "cider_clean", "cider_adv",    "apa_clean",
      "apa_adv",       "niqe_clean",  "niqe_adv"};
  return names;
}

struct CaptionCorpus {
  std::vector<std::vector<metrics::TokenSeq>> refs;  // per record
};

void evaluate_captions(const RetrievalCaptioner& captioner, const Image& clean,
                       const Image& adv, const std::vector<metrics::TokenSeq>& refs,
                       const CaptionCorpus& corpus, RecordResult& r) {
  CaptionEval e;
  e.clean_caption = captioner.caption(clean);
  e.adv_caption = captioner.caption(adv);
  const std::vector<std::vector<metrics::TokenSeq>> ref_set{refs};
  auto score = [&](const std::string& cand, double& b, double& rl, double& c) {
    const std::vector<metrics::TokenSeq> cands{metrics::tokenize(cand)};
    b = metrics::bleu(cands, ref_set);
    rl = metrics::rouge_l(cands[0], refs);
    c = metrics::cider(cands, ref_set, corpus.refs);
  };
  score(e.clean_caption, e.bleu_clean, e.rouge_l_clean, e.cider_clean);
  score(e.adv_caption, e.bleu_adv, e.rouge_l_adv, e.cider_adv);
  r.captions = std::move(e);
}

RecordResult process_record(const RunConfig& cfg, const DatasetRecord& rec,
                            std::uint64_t seed, const Backends& backends,
                            const RetrievalCaptioner* captioner,
                            const CaptionCorpus& corpus,
                            const std::vector<metrics::TokenSeq>& refs) {
  RecordResult r;
  r.id = rec.id;
  r.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const Image clean = read_png(rec.image_path);
    AttackConfig ac = cfg.attack;
    ac.seed = seed;
    const std::string text = attack_text(rec);
    const std::string summary =
        rec.captions.empty() ? rec.id : rec.captions.front();
    const AttackResult res = run_lightd(ac, *backends.relighter, *backends.victim,
                                        *backends.recommender, clean, text, summary);
    r.recommendation_source = std::string(to_string(res.recommendation.source));
    r.initial_lighting = res.recommendation.params;
    r.final_lighting = res.final_lighting;
    r.initial_loss = res.initial_loss;
    r.final_loss = res.best_loss;
    r.params_best_j = res.params_best_j;
    for (const LossBreakdown& l : res.j_trace()) r.j_trace.push_back(l.total);
    r.adversarial = res.final_relit;

    if (captioner != nullptr) {
      if (!refs.empty()) evaluate_captions(*captioner, clean, r.adversarial, refs, corpus, r);
      if (rec.question && rec.answer) {
        VqaEval v;
        v.question = *rec.question;
        v.answer = *rec.answer;
        v.clean_prediction = captioner->answer(clean, v.question);
        v.adv_prediction = captioner->answer(r.adversarial, v.question);
        const std::string truth = metrics::normalize_answer(v.answer);
        v.correct_clean = metrics::normalize_answer(v.clean_prediction) == truth;
        v.correct_adv = metrics::normalize_answer(v.adv_prediction) == truth;
        r.vqa = std::move(v);
      }
    }
    if (backends.niqe) {
      try {
        r.niqe_clean = metrics::niqe_score(*backends.niqe, clean);
        r.niqe_adv = metrics::niqe_score(*backends.niqe, r.adversarial);
      } catch (const Error& e) {
        r.niqe_clean.reset();
        r.niqe_adv.reset();
        r.niqe_error = e.what();
      }
    }
    r.ok = true;
  } catch (const std::exception& e) {
    r = RecordResult{};
    r.id = rec.id;
    r.seed = seed;
    r.error = e.what();
  }
  r.wall_ms = std::chrono::duration<double, std::milli>(
                  std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<DatasetRecord> parse_manifest(std::string_view jsonl,
                                          const std::filesystem::path& base_dir) {
  std::vector<DatasetRecord> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (blank(line)) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      manifest_fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) manifest_fail(line_no, "expected a JSON object");

    DatasetRecord rec;
    rec.id = required_string(j, "id", line_no);
    if (rec.id.empty()) manifest_fail(line_no, "\"id\" must be non-empty");
    const std::string image = required_string(j, "image_path", line_no);
    if (image.empty()) manifest_fail(line_no, "\"image_path\" must be non-empty");
    const std::filesystem::path ip(image);
    rec.image_path = ip.is_absolute() || base_dir.empty() ? ip : base_dir / ip;

    if (!j.contains("captions") || !j["captions"].is_array()) {
      manifest_fail(line_no, "\"captions\" must be an array of strings");
    }
    for (const json& c : j["captions"]) {
      if (!c.is_string()) manifest_fail(line_no, "\"captions\" must be an array of strings");
      rec.captions.push_back(c.get<std::string>());
      if (metrics::tokenize(rec.captions.back()).empty()) {
        manifest_fail(line_no, "empty caption");
      }
    }
    if (rec.captions.empty()) manifest_fail(line_no, "\"captions\" needs at least one entry");
    rec.question = optional_string(j, "question", line_no);
    rec.answer = optional_string(j, "answer", line_no);
    if (rec.question.has_value() != rec.answer.has_value()) {
      manifest_fail(line_no, "\"question\" and \"answer\" must appear together");
    }

    const auto [it, inserted] = seen.emplace(rec.id, line_no);
    if (!inserted) {
      manifest_fail(line_no, "duplicate id \"" + rec.id + "\" (first seen on line " +
                                 std::to_string(it->second) + ")");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path) {
  const std::string text = read_file(path, "manifest");
  try {
    return parse_manifest(text, path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

RetrievalCaptioner::RetrievalCaptioner(EmbedderConfig embedder,
                                       std::vector<std::string> caption_pool,
                                       std::vector<std::string> answer_pool)
    : embedder_(embedder) {
  std::set<std::string> seen;
  for (auto& c : caption_pool) {
    if (seen.insert(c).second) captions_.push_back(std::move(c));
  }
  seen.clear();
  for (auto& a : answer_pool) {
    if (seen.insert(a).second) answers_.push_back(std::move(a));
  }
  for (const auto& c : captions_) caption_vecs_.push_back(embedder_.embed_text(c));
}

std::string RetrievalCaptioner::caption(const Image& img) const {
  if (captions_.empty()) return {};
  const auto v = embedder_.embed_image(img);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < captions_.size(); ++i) {
    const double s = metrics::cosine_similarity(v, caption_vecs_[i]);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return captions_[best];
}

std::string RetrievalCaptioner::answer(const Image& img, std::string_view question) const {
  if (answers_.empty()) return {};
  const auto v = embedder_.embed_image(img);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < answers_.size(); ++i) {
    const auto t = embedder_.embed_text(std::string(question) + " " + answers_[i]);
    const double s = metrics::cosine_similarity(v, t);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return answers_[best];
}

Backends make_backends(const RunConfig& config) {
  config.validate();
  Backends b;
  if (config.backend.kind == BackendKind::kSurrogate) {
    b.relighter = std::make_unique<SurrogateRelighter>(config.backend.relight);
    b.victim = std::make_unique<SurrogateVictim>(config.backend.victim);
  } else {
    const RemoteEndpointConfig ep{config.backend.endpoint, config.backend.timeout,
                                  config.backend.max_in_flight};
    b.relighter = std::make_unique<RemoteRelighter>(ep);
    b.victim = std::make_unique<RemoteVictim>(ep);
  }
  b.recommender = std::make_unique<Recommender>(config.recommender);
  if (config.niqe_model) b.niqe = metrics::load_niqe_model(*config.niqe_model);
  return b;
}

std::string attack_text(const DatasetRecord& record) {
  if (!record.captions.empty()) return record.captions.front();
  if (record.question && record.answer) return *record.question + " " + *record.answer;
  throw_invalid("record " + record.id + " has no caption or question/answer");
}

std::map<std::string, double> record_metrics(const RecordResult& r) {
  std::map<std::string, double> m;
  if (!r.ok) return m;
  m["initial_j"] = r.initial_loss.total;
  m["final_j"] = r.final_loss.total;
  m["j_gain"] = r.final_loss.total - r.initial_loss.total;
  m["final_match_term"] = r.final_loss.match_term;
  m["final_nat_term"] = r.final_loss.nat_term;
  if (r.captions) {
    m["bleu_clean"] = r.captions->bleu_clean;
    m["bleu_adv"] = r.captions->bleu_adv;
    m["rouge_l_clean"] = r.captions->rouge_l_clean;
    m["rouge_l_adv"] = r.captions->rouge_l_adv;
    m["cider_clean"] = r.captions->cider_clean;
    m["cider_adv"] = r.captions->cider_adv;
  }
  if (r.vqa) {
    m["apa_clean"] = r.vqa->correct_clean ? 1.0 : 0.0;
    m["apa_adv"] = r.vqa->correct_adv ? 1.0 : 0.0;
  }
  if (r.niqe_clean) m["niqe_clean"] = *r.niqe_clean;
  if (r.niqe_adv) m["niqe_adv"] = *r.niqe_adv;
  return m;
}

std::map<std::string, double> compute_aggregates(std::span<const RecordResult> records) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const RecordResult& r : records) {
    for (const auto& [k, v] : record_metrics(r)) {
      auto& slot = acc[k];
      slot.first += v;
      slot.second += 1;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [k, s] : acc) out[k] = s.first / static_cast<double>(s.second);
  return out;
}

RunReport run_batch(const RunConfig& config, std::span<const DatasetRecord> records,
                    const Backends& backends) {
  config.validate();
  if (!backends.relighter || !backends.victim || !backends.recommender) {
    throw_invalid("run_batch: backends not initialized");
  }
  RunReport report;
  report.master_seed = config.seed;
  report.relight_id = backends.relighter->id();
  report.victim_id = backends.victim->id();

  CaptionCorpus corpus;
  std::vector<std::string> caption_pool, answer_pool;
  for (const DatasetRecord& rec : records) {
    std::vector<metrics::TokenSeq> refs;
    for (const auto& c : rec.captions) {
      refs.push_back(metrics::tokenize(c));
      caption_pool.push_back(c);
    }
    corpus.refs.push_back(std::move(refs));
    if (rec.answer) answer_pool.push_back(*rec.answer);
  }
  // Caption and VQA predictions need a model; the surrogate stack supplies a
  // retrieval stand-in, remote mode has no captioning endpoint.
  std::optional<RetrievalCaptioner> captioner;
  if (config.backend.kind == BackendKind::kSurrogate && !records.empty()) {
    captioner.emplace(config.backend.victim.match, caption_pool, answer_pool);
  }

  report.records.resize(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      report.records[i] =
          process_record(config, records[i], derive_seed(config.seed, i), backends,
                         captioner ? &*captioner : nullptr, corpus, corpus.refs[i]);
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(config.workers), records.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  for (const RecordResult& r : report.records) {
    if (!r.ok) ++report.failed;
  }
  report.aggregates = compute_aggregates(report.records);
  return report;
}

std::string report_to_json(const RunReport& report, bool include_timing) {
  json recs = json::array();
  for (const RecordResult& r : report.records) {
    json j = {{"id", r.id}, {"seed", r.seed}, {"ok", r.ok}};
    if (!r.ok) {
      j["error"] = r.error;
    } else {
      j["recommendation_source"] = r.recommendation_source;
      j["initial_lighting"] = params_json(r.initial_lighting);
      j["final_lighting"] = params_json(r.final_lighting);
      j["initial_loss"] = loss_json(r.initial_loss);
      j["final_loss"] = loss_json(r.final_loss);
      j["params_best_j"] = r.params_best_j;
      j["j_trace"] = r.j_trace;
      if (r.captions) {
        const CaptionEval& c = *r.captions;
        j["captions"] = {{"clean_caption", c.clean_caption},
                         {"adv_caption", c.adv_caption},
                         {"bleu_clean", c.bleu_clean},
                         {"bleu_adv", c.bleu_adv},
                         {"rouge_l_clean", c.rouge_l_clean},
                         {"rouge_l_adv", c.rouge_l_adv},
                         {"cider_clean", c.cider_clean},
                         {"cider_adv", c.cider_adv}};
      }
      if (r.vqa) {
        const VqaEval& v = *r.vqa;
        j["vqa"] = {{"question", v.question},
                    {"answer", v.answer},
                    {"clean_prediction", v.clean_prediction},
                    {"adv_prediction", v.adv_prediction},
                    {"correct_clean", v.correct_clean},
                    {"correct_adv", v.correct_adv}};
      }
      if (r.niqe_clean) j["niqe_clean"] = *r.niqe_clean;
      if (r.niqe_adv) j["niqe_adv"] = *r.niqe_adv;
      if (!r.niqe_error.empty()) j["niqe_error"] = r.niqe_error;
      if (!r.adv_image_file.empty()) j["adv_image"] = r.adv_image_file;
    }
    if (include_timing) j["wall_ms"] = r.wall_ms;
    recs.push_back(std::move(j));
  }
  const json root = {{"format", std::string(kReportFormat)},
                     {"master_seed", report.master_seed},
                     {"relight_id", report.relight_id},
                     {"victim_id", report.victim_id},
                     {"count", report.records.size()},
                     {"failed", report.failed},
                     {"aggregates", report.aggregates},
                     {"records", std::move(recs)}};
  return root.dump(2) + "\n";
}

std::string report_to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "id,seed,ok,error,recommendation_source,direction";
  for (const auto& name : metric_names()) out << ',' << name;
  out << ",adv_image,wall_ms\n";
  for (const RecordResult& r : report.records) {
    out << csv_field(r.id) << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
        << csv_field(r.error) << ',' << r.recommendation_source << ','
        << (r.ok ? to_string(r.final_lighting.direction) : std::string_view{});
    const auto m = record_metrics(r);
    for (const auto& name : metric_names()) {
      out << ',';
      if (auto it = m.find(name); it != m.end()) out << format_double(it->second);
    }
    out << ',' << csv_field(r.adv_image_file) << ',' << format_double(r.wall_ms) << '\n';
  }
  return out.str();
}

std::string sanitize_id(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                      c == '-';
    out.push_back(keep ? c : '_');
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

void write_report(RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  std::set<std::string> used;
  for (RecordResult& r : report.records) {
    r.adv_image_file.clear();
    if (!r.ok || r.adversarial.empty()) continue;
    const std::string stem = sanitize_id(r.id);
    std::string name = stem + "_adv.png";
    for (int n = 2; used.contains(name); ++n) {
      name = stem + "-" + std::to_string(n) + "_adv.png";
    }
    used.insert(name);
    write_png(dir / name, r.adversarial);
    r.adv_image_file = name;
  }
  write_file(dir / "report.json", report_to_json(report, true));
  write_file(dir / "report.csv", report_to_csv(report));
}

RunReport load_report(const std::filesystem::path& report_json) {
  const std::string text = read_file(report_json, "report");
  RunReport rep;
  try {
    const json root = json::parse(text);
    if (root.value("format", "") != kReportFormat) {
      throw Error(ErrorCode::kParseError, "unknown report format");
    }
    rep.master_seed = root.at("master_seed").get<std::uint64_t>();
    rep.relight_id = root.at("relight_id").get<std::string>();
    rep.victim_id = root.at("victim_id").get<std::string>();
    rep.failed = root.at("failed").get<std::size_t>();
    rep.aggregates = root.at("aggregates").get<std::map<std::string, double>>();
    for (const json& j : root.at("records")) {
      RecordResult r;
      r.id = j.at("id").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.ok = j.at("ok").get<bool>();
      r.wall_ms = j.value("wall_ms", 0.0);
      if (!r.ok) {
        r.error = j.value("error", "");
        rep.records.push_back(std::move(r));
        continue;
      }
      r.recommendation_source = j.at("recommendation_source").get<std::string>();
      r.initial_lighting = params_from_json(j.at("initial_lighting"));
      r.final_lighting = params_from_json(j.at("final_lighting"));
      r.initial_loss = loss_from_json(j.at("initial_loss"));
      r.final_loss = loss_from_json(j.at("final_loss"));
      r.params_best_j = j.at("params_best_j").get<double>();
      r.j_trace = j.at("j_trace").get<std::vector<double>>();
      if (j.contains("captions")) {
        const json& c = j["captions"];
        CaptionEval e;
        e.clean_caption = c.at("clean_caption").get<std::string>();
        e.adv_caption = c.at("adv_caption").get<std::string>();
        e.bleu_clean = c.at("bleu_clean").get<double>();
        e.bleu_adv = c.at("bleu_adv").get<double>();
        e.rouge_l_clean = c.at("rouge_l_clean").get<double>();
        e.rouge_l_adv = c.at("rouge_l_adv").get<double>();
        e.cider_clean = c.at("cider_clean").get<double>();
        e.cider_adv = c.at("cider_adv").get<double>();
        r.captions = std::move(e);
      }
      if (j.contains("vqa")) {
        const json& v = j["vqa"];
        VqaEval e;
        e.question = v.at("question").get<std::string>();
        e.answer = v.at("answer").get<std::string>();
        e.clean_prediction = v.at("clean_prediction").get<std::string>();
        e.adv_prediction = v.at("adv_prediction").get<std::string>();
        e.correct_clean = v.at("correct_clean").get<bool>();
        e.correct_adv = v.at("correct_adv").get<bool>();
        r.vqa = std::move(e);
      }
      if (j.contains("niqe_clean")) r.niqe_clean = j["niqe_clean"].get<double>();
      if (j.contains("niqe_adv")) r.niqe_adv = j["niqe_adv"].get<double>();
      r.niqe_error = j.value("niqe_error", "");
      r.adv_image_file = j.value("adv_image", "");
      rep.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, report_json.string() + ": " + e.what());
  }
  return rep;
}

}  // namespace lightd
