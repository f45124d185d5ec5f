#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lightd/attack.hpp"
#include "lightd/config.hpp"
#include "lightd/metrics/niqe.hpp"

namespace lightd {

struct DatasetRecord {
  std::string id;
  std::filesystem::path image_path;  // resolved against the manifest directory
  std::vector<std::string> captions;
  std::optional<std::string> question;
  std::optional<std::string> answer;
};

/// JSON lines: {"id", "image_path", "captions": [...], "question"?, "answer"?}.
/// Blank lines are skipped. Errors name the 1-based line number.
std::vector<DatasetRecord> load_manifest(const std::filesystem::path& path);
std::vector<DatasetRecord> parse_manifest(std::string_view jsonl,
                                          const std::filesystem::path& base_dir = {});

/// Picks the pool entry whose text embedding is closest to the image's
/// embedding. Stands in for a captioning / VQA model in surrogate mode.
class RetrievalCaptioner {
 public:
  RetrievalCaptioner(EmbedderConfig embedder, std::vector<std::string> caption_pool,
                     std::vector<std::string> answer_pool);

  std::string caption(const Image& img) const;
  std::string answer(const Image& img, std::string_view question) const;

 private:
  SurrogateEmbedder embedder_;
  std::vector<std::string> captions_;
  std::vector<std::vector<double>> caption_vecs_;
  std::vector<std::string> answers_;
};

struct Backends {
  std::unique_ptr<RelightBackend> relighter;
  std::unique_ptr<VictimBackend> victim;
  std::unique_ptr<Recommender> recommender;
  std::optional<metrics::NiqeModel> niqe;
};

/// Surrogate or remote backends per config; loads the NIQE model if set.
Backends make_backends(const RunConfig& config);

struct CaptionEval {
  std::string clean_caption;
  std::string adv_caption;
  double bleu_clean = 0, bleu_adv = 0;
  double rouge_l_clean = 0, rouge_l_adv = 0;
  double cider_clean = 0, cider_adv = 0;
};

struct VqaEval {
  std::string question;
  std::string answer;
  std::string clean_prediction;
  std::string adv_prediction;
  bool correct_clean = false;
  bool correct_adv = false;
};

struct RecordResult {
  std::string id;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  std::string recommendation_source;
  LightingParams initial_lighting;
  LightingParams final_lighting;
  LossBreakdown initial_loss;
  LossBreakdown final_loss;
  double params_best_j = 0.0;
  std::vector<double> j_trace;
  std::optional<CaptionEval> captions;
  std::optional<VqaEval> vqa;
  std::optional<double> niqe_clean;
  std::optional<double> niqe_adv;
  std::string niqe_error;
  double wall_ms = 0.0;
  std::string adv_image_file;  // set by write_report

  Image adversarial;  // not serialized to JSON
};

struct RunReport {
  std::uint64_t master_seed = 0;
  std::string relight_id;
  std::string victim_id;
  std::vector<RecordResult> records;  // manifest order
  /// Mean of each per-record metric over successful records that carry it.
  /// Metrics with no contributing record are absent.
  std::map<std::string, double> aggregates;
  std::size_t failed = 0;
};

/// Names of the per-record metrics that feed the aggregates.
std::map<std::string, double> record_metrics(const RecordResult& r);
std::map<std::string, double> compute_aggregates(std::span<const RecordResult> records);

/// The text to attack: the first caption, else "question answer".
std::string attack_text(const DatasetRecord& record);

/// Per record: recommend, attack, evaluate. Failed records carry their error
/// and do not stop the batch. Records are spread over config.workers threads.
RunReport run_batch(const RunConfig& config, std::span<const DatasetRecord> records,
                    const Backends& backends);

/// JSON text of the report; timing fields are omitted when include_timing
/// is false, which makes equal runs compare equal byte for byte.
std::string report_to_json(const RunReport& report, bool include_timing = true);
std::string report_to_csv(const RunReport& report);

/// Writes report.json, report.csv and <id>_adv.png per successful record.
void write_report(RunReport& report, const std::filesystem::path& dir);
RunReport load_report(const std::filesystem::path& report_json);

/// Characters outside [A-Za-z0-9._-] become '_'.
std::string sanitize_id(std::string_view id);

}  // namespace lightd
