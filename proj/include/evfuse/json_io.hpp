#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "evfuse/evidential_net.hpp"
#include "evfuse/metrics.hpp"
#include "evfuse/types.hpp"

// JSON forms of the library's value types and of model checkpoints.
namespace evfuse::io {

using nlohmann::json;

// {"beliefs":[...], "uncertainty":u}
json to_json(const Opinion& opinion);
Opinion opinion_from_json(const json& j);

// {"rates":[...], "weight":W}
json to_json(const BaseRate& base_rate);
BaseRate base_rate_from_json(const json& j);

// Versioned checkpoint: {"format":"evfuse-model","version":1,"config":{...},
// "base_rate":{...},"heads":[{"layers":[{"in","out","weights","bias"}],
// "rbf":{"in","units","centers"} (optional), "scaling":{"shift","scale"}
// (optional)}]}.
// Doubles are written in shortest round-trip form.
inline constexpr int kCheckpointVersion = 1;
json to_json(const net::ModelConfig& cfg);
// "dense" or "rbf"
net::HeadKind head_kind_from_name(const std::string& name);
net::ModelConfig model_config_from_json(const json& j);
json to_json(const net::EvidentialModel& model);
net::EvidentialModel model_from_json(const json& j);

void save_model(const net::EvidentialModel& model, const std::filesystem::path& path);
net::EvidentialModel load_model(const std::filesystem::path& path);

json to_json(const net::TrainingReport& report);

// {"acc", "auc" (null unless K == 2), "ece", "n", "bins":[...]}; the
// positive-class scores feed the AUC.
json metrics_report(std::span<const metrics::EvalRecord> records,
                    std::span<const double> positive_scores, std::size_t num_classes,
                    std::size_t num_bins);

json read_json_file(const std::filesystem::path& path);

}  // namespace evfuse::io
