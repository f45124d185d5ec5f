#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "lightd/image.hpp"
#include "lightd/lightgen.hpp"

namespace lightd {

namespace detail {
class JsonHttpClient;
}

enum class RecommendationSource { kLlm, kHeuristic };

std::string_view to_string(RecommendationSource s);

struct Recommendation {
  LightingParams params;
  RecommendationSource source = RecommendationSource::kHeuristic;
  std::optional<std::string> raw_response;  // LLM reply, or the failure text
};

/// Versioned default prompt. "{summary}" is replaced by the image summary.
extern const std::string_view kPromptTemplateVersion;
extern const std::string_view kDefaultPromptTemplate;

std::string build_prompt(std::string_view image_summary,
                         std::string_view prompt_template = kDefaultPromptTemplate);

/// Extracts the first JSON object in `raw` and reads start_color, end_color
/// ("#RRGGBB") and direction. Weight is fixed at 1.0. Throws kParseError.
LightingParams parse_response(std::string_view raw);

/// Offline initialization from image statistics.
LightingParams heuristic_fallback(const Image& img);

/// Chat-completion endpoint (OpenAI-style JSON). The API key is read from
/// the environment variable named by api_key_env, never from config values.
struct LlmEndpointConfig {
  std::string url;  // full URL, e.g. https://api.openai.com/v1/chat/completions
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{30000};
  int max_in_flight = 4;
  bool attach_image = false;
  std::optional<std::string> prompt_template;
};

struct RecommenderConfig {
  std::optional<LlmEndpointConfig> llm;
};

class Recommender {
 public:
  explicit Recommender(RecommenderConfig config = {});
  ~Recommender();
  Recommender(Recommender&&) noexcept;
  Recommender& operator=(Recommender&&) noexcept;

  /// Never throws on endpoint or parse failures; those downgrade to the
  /// heuristic with the failure recorded in raw_response.
  Recommendation recommend(const Image& img, std::string_view summary) const;

  const RecommenderConfig& config() const noexcept { return config_; }

 private:
  std::string ask_llm(const Image& img, std::string_view summary) const;

  RecommenderConfig config_;
  std::unique_ptr<detail::JsonHttpClient> client_;
  std::string path_;
};

}  // namespace lightd
