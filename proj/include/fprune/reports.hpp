#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fprune/filter_stats.hpp"
#include "fprune/flops.hpp"
#include "fprune/pruning.hpp"
#include "fprune/trainer.hpp"

namespace fprune {

void to_json(nlohmann::json& j, const SurgeryRecord& r);
void from_json(const nlohmann::json& j, SurgeryRecord& r);
void to_json(nlohmann::json& j, const PlanEntry& e);
void from_json(const nlohmann::json& j, PlanEntry& e);
void to_json(nlohmann::json& j, const PruningPlan& p);
void to_json(nlohmann::json& j, const LayerRecord& r);
void from_json(const nlohmann::json& j, LayerRecord& r);
void to_json(nlohmann::json& j, const RecoveryTrace& t);
void to_json(nlohmann::json& j, const EpochStats& e);
void to_json(nlohmann::json& j, const ScoreVector& s);
void to_json(nlohmann::json& j, const FlopReport& f);

// Pretty-printed with a trailing newline; stable key order.
std::string dump_json(const nlohmann::json& j);

// criterion,m,seed,phase,step,layer,accuracy
// phase is baseline, surgery, finetune, final_epoch or final.
std::string format_traces_csv(const std::vector<RecoveryTrace>& traces);
// epoch,loss,train_accuracy,valid_accuracy
std::string format_curve_csv(const std::vector<EpochStats>& curve);
std::string format_surgeries_csv(const std::vector<SurgeryRecord>& records);

}  // namespace fprune
