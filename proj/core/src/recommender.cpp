#include "lightd/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "http_client.hpp"
#include "lightd/error.hpp"
#include "lightd/png.hpp"
#include "wire.hpp"

namespace lightd {

const std::string_view kPromptTemplateVersion = "lightd-prompt/1";

const std::string_view kDefaultPromptTemplate =
    R"(You are assisting with photographic relighting.

Image description: {summary}

Pick a natural lighting condition for this scene, expressed as a two-color
directional light: the color where the light enters the frame, the color it
fades toward, and the side it comes from. Favor colors that fit the scene's
existing palette and time of day so the relit photo still looks plausible.

Answer with a single JSON object and nothing else, using exactly these keys:
{"start_color": "#RRGGBB", "end_color": "#RRGGBB", "direction": "left_to_right|right_to_left|top_to_bottom|bottom_to_top"}
)";

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 360.0) / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  Rgb rgb{0, 0, 0};
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  const double m = v - c;
  for (double& ch : rgb) ch = std::clamp(ch + m, 0.0, 1.0);
  return rgb;
}

// Hue in degrees and saturation; achromatic colors get hue 0.
std::pair<double, double> hue_saturation(const Rgb& rgb) {
  const double mx = std::max({rgb[0], rgb[1], rgb[2]});
  const double mn = std::min({rgb[0], rgb[1], rgb[2]});
  const double delta = mx - mn;
  if (mx <= 0.0 || delta <= 0.0) return {0.0, 0.0};
  double h = 0.0;
  if (mx == rgb[0]) h = 60.0 * std::fmod((rgb[1] - rgb[2]) / delta, 6.0);
  else if (mx == rgb[1]) h = 60.0 * ((rgb[2] - rgb[0]) / delta + 2.0);
  else h = 60.0 * ((rgb[0] - rgb[1]) / delta + 4.0);
  if (h < 0) h += 360.0;
  return {h, delta / mx};
}

[[noreturn]] void parse_fail(const std::string& message) {
  throw Error(ErrorCode::kParseError, "recommendation: " + message);
}

// Returns the first balanced {...} span, honoring JSON string literals.
std::string_view first_json_object(std::string_view raw) {
  const auto start = raw.find('{');
  if (start == std::string_view::npos) parse_fail("no JSON object in response");
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char ch = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (ch == '\\') escaped = true;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{') ++depth;
    else if (ch == '}' && --depth == 0) return raw.substr(start, i - start + 1);
  }
  parse_fail("unterminated JSON object");
}

}  // namespace

std::string_view to_string(RecommendationSource s) {
  return s == RecommendationSource::kLlm ? "llm" : "heuristic";
}

std::string build_prompt(std::string_view image_summary,
                         std::string_view prompt_template) {
  std::string out(prompt_template);
  const std::string key = "{summary}";
  if (const auto pos = out.find(key); pos != std::string::npos) {
    out.replace(pos, key.size(), image_summary);
  } else {
    out += "\n";
    out += image_summary;
  }
  return out;
}

LightingParams parse_response(std::string_view raw) {
  const auto obj = nlohmann::json::parse(first_json_object(raw), nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) parse_fail("malformed JSON object");

  auto read_color = [&](const char* key) {
    if (!obj.contains(key) || !obj[key].is_string()) {
      parse_fail(std::string("missing string field ") + key);
    }
    const auto c = parse_hex_color(obj[key].get<std::string>());
    if (!c) parse_fail(std::string(key) + " is not #RRGGBB");
    return *c;
  };

  LightingParams p;
  p.start_color = read_color("start_color");
  p.end_color = read_color("end_color");
  if (!obj.contains("direction") || !obj["direction"].is_string()) {
    parse_fail("missing string field direction");
  }
  const auto d = parse_direction(obj["direction"].get<std::string>());
  if (!d) parse_fail("unknown direction " + obj["direction"].get<std::string>());
  p.direction = *d;
  p.weight = 1.0;
  return p;
}

LightingParams heuristic_fallback(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> luma(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto px = img.data().subspan(3 * i, 3);
    luma[i] = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return luma[a] > luma[b]; });
  const std::size_t top = std::max<std::size_t>(1, n / 4);
  Rgb mean{0, 0, 0};
  for (std::size_t k = 0; k < top; ++k) {
    for (int c = 0; c < 3; ++c) mean[c] += img.data()[3 * order[k] + c];
  }
  for (double& m : mean) m /= static_cast<double>(top);

  const auto [hue, sat] = hue_saturation(mean);
  LightingParams p;
  p.start_color = hsv_to_rgb(hue, sat, 0.9);
  p.end_color = hsv_to_rgb(hue, sat, 0.35);
  p.weight = 1.0;

  double total = 0.0, cx = 0.0, cy = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double l = luma[static_cast<std::size_t>(y) * w + x];
      total += l;
      cx += l * x;
      cy += l * y;
    }
  }
  double ox = 0.0, oy = 0.0;
  if (total > 0.0) {
    ox = (cx / total - (w - 1) / 2.0) / w;
    oy = (cy / total - (h - 1) / 2.0) / h;
  }
  constexpr double kCentered = 1e-9;
  if (std::fabs(ox) < kCentered && std::fabs(oy) < kCentered) {
    p.direction = Direction::kLeftToRight;
  } else if (std::fabs(ox) >= std::fabs(oy)) {
    p.direction = ox <= 0.0 ? Direction::kLeftToRight : Direction::kRightToLeft;
  } else {
    p.direction = oy < 0.0 ? Direction::kTopToBottom : Direction::kBottomToTop;
  }
  return p;
}

Recommender::Recommender(RecommenderConfig config) : config_(std::move(config)) {
  if (config_.llm) {
    auto [base, path] = detail::split_url(config_.llm->url);
    client_ = std::make_unique<detail::JsonHttpClient>(detail::HttpClientOptions{
        base, config_.llm->timeout, config_.llm->max_in_flight});
    path_ = path;
  }
}

Recommender::~Recommender() = default;
Recommender::Recommender(Recommender&&) noexcept = default;
Recommender& Recommender::operator=(Recommender&&) noexcept = default;

std::string Recommender::ask_llm(const Image& img, std::string_view summary) const {
  const auto& llm = *config_.llm;
  const std::string prompt =
      build_prompt(summary, llm.prompt_template ? std::string_view(*llm.prompt_template)
                                                : kDefaultPromptTemplate);
  nlohmann::json content;
  if (llm.attach_image) {
    const auto png = png_encode(img);
    content = nlohmann::json::array(
        {{{"type", "text"}, {"text", prompt}},
         {{"type", "image_url"},
          {"image_url", {{"url", "data:image/png;base64," + wire::base64_encode(png)}}}}});
  } else {
    content = prompt;
  }
  const nlohmann::json body = {
      {"model", llm.model},
      {"temperature", 0},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})}};

  std::map<std::string, std::string> headers;
  if (!llm.api_key_env.empty()) {
    if (const char* key = std::getenv(llm.api_key_env.c_str()); key != nullptr && *key) {
      headers["Authorization"] = std::string("Bearer ") + key;
    }
  }
  const auto res = client_->post(path_, body, headers);
  const auto* msg = res.contains("choices") && res["choices"].is_array() &&
                            !res["choices"].empty()
                        ? &res["choices"][0]
                        : nullptr;
  if (msg == nullptr || !msg->contains("message") ||
      !(*msg)["message"].contains("content") ||
      !(*msg)["message"]["content"].is_string()) {
    throw Error(ErrorCode::kParseError, "chat response lacks choices[0].message.content");
  }
  return (*msg)["message"]["content"].get<std::string>();
}

Recommendation Recommender::recommend(const Image& img, std::string_view summary) const {
  Recommendation rec;
  if (client_) {
    std::string raw;
    try {
      raw = ask_llm(img, summary);
      rec.params = parse_response(raw);
      rec.source = RecommendationSource::kLlm;
      rec.raw_response = raw;
      return rec;
    } catch (const std::exception& e) {
      rec.raw_response = raw.empty() ? std::string(e.what())
                                     : raw + "\n[fallback: " + e.what() + "]";
    }
  }
  rec.params = heuristic_fallback(img);
  rec.source = RecommendationSource::kHeuristic;
  return rec;
}

}  // namespace lightd
