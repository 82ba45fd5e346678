#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "salesopt/domain.hpp"

namespace salesopt {

// ---- templates ----

enum class AlertKind { LowEngagement, UpsellFlag, ChurnFlag };
std::string_view to_string(AlertKind k);
AlertKind alert_kind_for(ActionType action);

struct TemplateSlots {
  std::optional<int> d;
  std::optional<std::string> product;
  std::optional<double> y;
  std::optional<double> delta_y;
};

/// Shortest round-trip decimal, integers without a fractional part, never "-0".
std::string format_value(double v);

/// Throws InvalidArgument naming the first missing slot.
std::string render_template(AlertKind kind, const TemplateSlots& slots);

// ---- feature mapping and thresholds ----

struct FeatureMappingRow {
  std::string feature_name;
  std::string expression;
};

class FeatureMapping {
 public:
  FeatureMapping() = default;
  /// Throws ConfigError on a duplicate feature name.
  explicit FeatureMapping(std::vector<FeatureMappingRow> rows);

  /// The mapped expression, or the feature name itself when unmapped.
  std::string expression(const std::string& feature) const;
  bool contains(const std::string& feature) const { return index_.contains(feature); }
  const std::vector<FeatureMappingRow>& rows() const { return rows_; }

 private:
  std::vector<FeatureMappingRow> rows_;
  std::map<std::string, std::size_t> index_;
};

enum class ModelKind { TreatmentModel, ControlModel, Forecaster };
enum class Comparator { Less, Greater, LessEqual, GreaterEqual };
std::string_view to_string(ModelKind m);
std::string_view to_string(Comparator c);
ModelKind model_kind_from_string(std::string_view s);
Comparator comparator_from_string(std::string_view s);

struct ThresholdRule {
  std::string feature_name;
  ModelKind model = ModelKind::TreatmentModel;
  Comparator comparator = Comparator::Greater;
  double bound = 0.0;
};

/// Model output for one (feature, model) pair.
struct ModelOutput {
  std::string feature_name;
  ModelKind model = ModelKind::TreatmentModel;
  double value = 0.0;
};

/// Throws ConfigError when a rule names a feature outside `known_features`.
void validate_rules(std::span<const ThresholdRule> rules, std::span<const std::string> known_features);

/// Rules whose comparison holds, in rule order. Throws ConfigError when a rule
/// has no matching output.
std::vector<ThresholdRule> apply_thresholds(std::span<const ThresholdRule> rules,
                                            std::span<const ModelOutput> outputs);

/// Template for the chosen action followed by one "- " bullet per fired rule.
std::string render_explanation(ActionType action, const TemplateSlots& slots,
                               std::span<const ThresholdRule> fired, const FeatureMapping& mapping);

// ---- semantic grouping ----

struct FeatureGroup {
  std::string feature_name;
  std::string super_name;
  std::string ultra_name;
  /// False when the name had no l<n>m suffix and passed through unchanged.
  bool parsed = true;
};

/// "MetricA" -> "Metric A", "product_usage" -> "product usage".
std::string expand_metric_name(std::string_view metric);

/// Parses <metric>_l<n>m[_l<k>m...]; the final window wins. `expansions` overrides
/// the expanded meaning of a metric prefix.
FeatureGroup group_feature(const std::string& feature_name,
                           const std::map<std::string, std::string>& expansions = {});
std::vector<FeatureGroup> group_features(std::span<const std::string> feature_names,
                                         const std::map<std::string, std::string>& expansions = {});

// ---- instance importance ----

struct ImportanceRecord {
  std::string feature_name;
  double weight = 0.0;
  double value = 0.0;
  std::string account_id;
};

struct ImportanceConfig {
  int samples = 2000;
  /// Per-feature perturbation scale; also the distance metric of the kernel.
  Eigen::VectorXd scale;
  /// Population mean each weight is measured against.
  Eigen::VectorXd mean;
  /// Kernel width in scaled units; 0 selects 0.75 * sqrt(dims).
  double kernel_width = 0.0;
  double ridge_lambda = 1e-6;
  std::uint64_t seed = 1;
};

using Predictor = std::function<double(const Eigen::VectorXd&)>;

/// Local surrogate: Gaussian perturbations around x, kernel-weighted ridge of the
/// model output, weight_j = coef_j * (x_j - mean_j). A model that is constant over
/// the sample yields all-zero weights.
std::vector<ImportanceRecord> instance_importance(const Predictor& model, const Eigen::VectorXd& x,
                                                  std::span<const std::string> feature_names,
                                                  const ImportanceConfig& config,
                                                  const std::string& account_id = {});

// ---- narrative ----

class TextGenClient {
 public:
  virtual ~TextGenClient() = default;
  /// Throws Error on failure.
  virtual std::string generate(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

/// Renders the insights straight from the data block embedded in the prompt.
class DeterministicMock final : public TextGenClient {
 public:
  std::string generate(const std::string& prompt) override;
  std::string name() const override { return "mock"; }
};

struct ExternalHttpConfig {
  std::string url;  // e.g. http://localhost:8081/generate
  std::string auth_token;
  int timeout_ms = 5000;
};

/// POSTs {"prompt": ...} and reads {"text": ...} from the reply.
class ExternalHttp final : public TextGenClient {
 public:
  explicit ExternalHttp(ExternalHttpConfig config);
  std::string generate(const std::string& prompt) override;
  std::string name() const override { return "external_http"; }

 private:
  ExternalHttpConfig config_;
};

struct ValueChange {
  std::optional<double> previous;
  double current = 0.0;
};

/// "+33%"; empty when previous is absent or zero.
std::string format_percent_change(const ValueChange& v);

struct Insight {
  std::string ultra_name;
  double aggregate_weight = 0.0;
  bool low_confidence = false;
  std::vector<std::string> features;
};

struct Narrative {
  std::string text;
  std::vector<Insight> insights;
  std::string prompt;
  std::string client;
  bool fallback = false;
  std::string fallback_reason;
};

/// Prompt line that precedes the JSON data block.
inline constexpr std::string_view kPromptDataMarker = "### DATA";

/// Joins importances with groups, aggregates sum |weight| per ultra_name, orders
/// insights by aggregate weight (desc, ties by name) with zero-weight groups last
/// and flagged low-confidence, builds the prompt, and asks `client`. A failing
/// client falls back to the mock.
Narrative generate_narrative(std::span<const ImportanceRecord> importances,
                             std::span<const FeatureGroup> groups,
                             const std::map<std::string, ValueChange>& values, ActionType action,
                             TextGenClient& client);

}  // namespace salesopt
