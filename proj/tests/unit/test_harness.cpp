#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lightd/error.hpp"
#include "lightd/harness.hpp"
#include "lightd/png.hpp"
#include "lightd/synthetic.hpp"
#include "json.hpp"

using namespace lightd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Writes `count` synthetic scenes and returns the manifest text.
std::string write_corpus(const fs::path& dir, int count, int size = 24) {
  std::string manifest;
  const auto scenes = synthetic_corpus(1000, count, size, size);
  for (int i = 0; i < count; ++i) {
    const std::string name = "img" + std::to_string(i) + ".png";
    write_png(dir / name, scenes[i].image);
    nlohmann::json j = {{"id", "rec/" + std::to_string(i)},
                        {"image_path", name},
                        {"captions", scenes[i].captions}};
    if (i % 2 == 0) {
      j["question"] = scenes[i].question;
      j["answer"] = scenes[i].answer;
    }
    manifest += j.dump() + "\n";
  }
  return manifest;
}

RunConfig small_config() {
  RunConfig c;
  c.seed = 42;
  c.attack.param_iters = 3;
  c.attack.image_iters = 3;
  c.attack.resize_count = 3;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode manifest_error(std::string_view text, std::string* msg = nullptr) {
  try {
    parse_manifest(text);
  } catch (const Error& e) {
    if (msg) *msg = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("manifest parsing") {
  CHECK(parse_manifest("").empty());
  CHECK(parse_manifest("\n\n").empty());
  const auto one = parse_manifest(
      R"({"id": "a", "image_path": "x.png", "captions": ["c1", "c2"], "question": "q?", "answer": "yes"})",
      "/data");
  REQUIRE(one.size() == 1);
  CHECK(one[0].id == "a");
  CHECK(one[0].image_path == fs::path("/data/x.png"));
  CHECK(one[0].captions == std::vector<std::string>{"c1", "c2"});
  CHECK(*one[0].question == "q?");
  CHECK(*one[0].answer == "yes");
  CHECK(parse_manifest(R"({"id": "a", "image_path": "/abs/x.png", "captions": ["c"]})", "/data")[0]
            .image_path == fs::path("/abs/x.png"));
}

TEST_CASE("manifest errors name the line") {
  std::string text;
  for (int i = 1; i <= 6; ++i) {
    text += R"({"id": "r)" + std::to_string(i) + R"(", "image_path": "x.png", "captions": ["c"]})" "\n";
  }
  text += R"({"id": "r3", "image_path": "x.png", "captions": ["c"]})" "\n";
  std::string msg;
  CHECK(manifest_error(text, &msg) == ErrorCode::kParseError);
  CHECK(msg.find("line 7") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);

  CHECK(manifest_error("{\"id\": \"a\"\n", &msg) == ErrorCode::kParseError);
  CHECK(msg.find("line 1") != std::string::npos);
  CHECK(manifest_error("\n[1, 2]", &msg) == ErrorCode::kParseError);
  CHECK(msg.find("line 2") != std::string::npos);
  for (const char* bad :
       {R"({"id": "", "image_path": "x.png", "captions": ["c"]})",
        R"({"id": "a", "captions": ["c"]})",
        R"({"id": "a", "image_path": "x.png", "captions": []})",
        R"({"id": "a", "image_path": "x.png", "captions": [""]})",
        R"({"id": "a", "image_path": "x.png", "captions": "c"})",
        R"({"id": "a", "image_path": "x.png", "captions": ["c"], "question": "q"})",
        R"({"id": 5, "image_path": "x.png", "captions": ["c"]})"}) {
    CAPTURE(bad);
    CHECK(manifest_error(bad) == ErrorCode::kParseError);
  }
  CHECK_THROWS_AS(load_manifest("/nonexistent/manifest.jsonl"), Error);
}

TEST_CASE("attack text and id sanitizing") {
  DatasetRecord r{"x", "p", {"first", "second"}, std::nullopt, std::nullopt};
  CHECK(attack_text(r) == "first");
  r.captions.clear();
  r.question = "what color?";
  r.answer = "red";
  CHECK(attack_text(r) == "what color? red");
  CHECK(sanitize_id("a/b c:d.e-f_g") == "a_b_c_d.e-f_g");
}

TEST_CASE("empty manifest gives an empty report") {
  const auto cfg = small_config();
  const auto b = make_backends(cfg);
  const auto rep = run_batch(cfg, {}, b);
  CHECK(rep.records.empty());
  CHECK(rep.aggregates.empty());
  CHECK(rep.failed == 0);
  const auto j = nlohmann::json::parse(report_to_json(rep));
  CHECK(j["aggregates"].empty());
}

TEST_CASE("batch run: determinism, files and round trip") {
  TempDir tmp("lightd_harness_batch");
  const auto records = parse_manifest(write_corpus(tmp.path, 4), tmp.path);
  auto cfg = small_config();
  const auto b = make_backends(cfg);

  auto r1 = run_batch(cfg, records, b);
  auto r2 = run_batch(cfg, records, b);
  cfg.workers = 3;
  auto r3 = run_batch(cfg, records, b);
  CHECK(r1.failed == 0);
  CHECK(report_to_json(r1, false) == report_to_json(r2, false));
  CHECK(report_to_json(r1, false) == report_to_json(r3, false));

  write_report(r1, tmp.path / "out1");
  write_report(r2, tmp.path / "out2");
  for (const auto& rec : r1.records) {
    REQUIRE_FALSE(rec.adv_image_file.empty());
    const auto a = slurp(tmp.path / "out1" / rec.adv_image_file);
    CHECK(a == slurp(tmp.path / "out2" / rec.adv_image_file));
    const Image img = read_png(tmp.path / "out1" / rec.adv_image_file);
    CHECK(img.height() == 24);
    for (float v : img.data()) CHECK((v >= 0.0f && v <= 1.0f));
  }
  CHECK(r1.records[1].adv_image_file == "rec_1_adv.png");

  // CSV: header + one row per record
  const auto csv = slurp(tmp.path / "out1" / "report.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  // aggregates equal recomputation and survive a reload
  const auto again = compute_aggregates(r1.records);
  for (const auto& [k, v] : r1.aggregates) CHECK(std::abs(again.at(k) - v) <= 1e-9);
  const auto loaded = load_report(tmp.path / "out1" / "report.json");
  REQUIRE(loaded.aggregates.size() == r1.aggregates.size());
  for (const auto& [k, v] : r1.aggregates) CHECK(std::abs(loaded.aggregates.at(k) - v) <= 1e-9);
  CHECK(loaded.records.size() == 4);
  CHECK(loaded.master_seed == 42);

  for (const auto& rec : r1.records) {
    CHECK(rec.ok);
    CHECK(rec.final_loss.total >= rec.initial_loss.total);
    CHECK(rec.captions.has_value());
    CHECK(rec.j_trace.size() == 4 + 4);
  }
  CHECK(r1.records[0].vqa.has_value());
  CHECK_FALSE(r1.records[1].vqa.has_value());
  CHECK(r1.aggregates.count("apa_clean") == 1);
  CHECK(r1.aggregates.count("niqe_clean") == 0);
}

TEST_CASE("a failing record does not disturb the others") {
  TempDir tmp("lightd_harness_fail");
  const auto good = parse_manifest(write_corpus(tmp.path, 4), tmp.path);
  auto broken = good;
  broken[2].image_path = tmp.path / "missing.png";
  const auto cfg = small_config();
  const auto b = make_backends(cfg);
  const auto a = run_batch(cfg, good, b);
  const auto c = run_batch(cfg, broken, b);
  CHECK(c.failed == 1);
  CHECK_FALSE(c.records[2].ok);
  CHECK(c.records[2].error.find("missing.png") != std::string::npos);
  CHECK(record_metrics(c.records[2]).empty());
  for (int i : {0, 1, 3}) {
    CHECK(c.records[i].ok);
    CHECK(c.records[i].seed == a.records[i].seed);
    CHECK(c.records[i].j_trace == a.records[i].j_trace);
  }
  CHECK(c.records[2].seed == a.records[2].seed);
  // failed record is excluded from the means
  const double mean3 = (a.records[0].final_loss.total + a.records[1].final_loss.total +
                        a.records[3].final_loss.total) / 3.0;
  CHECK(std::abs(c.aggregates.at("final_j") - mean3) <= 1e-12);
}

TEST_CASE("colliding sanitized ids get distinct files") {
  TempDir tmp("lightd_harness_collide");
  auto records = parse_manifest(write_corpus(tmp.path, 2), tmp.path);
  records[0].id = "a/b";
  records[1].id = "a:b";
  const auto cfg = small_config();
  auto rep = run_batch(cfg, records, make_backends(cfg));
  write_report(rep, tmp.path / "out");
  CHECK(rep.records[0].adv_image_file != rep.records[1].adv_image_file);
  CHECK(fs::exists(tmp.path / "out" / rep.records[0].adv_image_file));
  CHECK(fs::exists(tmp.path / "out" / rep.records[1].adv_image_file));
}

}  // TEST_SUITE
