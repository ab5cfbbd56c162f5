#include "fprune/reports.hpp"

#include <sstream>

#include "fprune/io_util.hpp"

namespace fprune {

using nlohmann::json;

void to_json(json& j, const SurgeryRecord& r) {
  j = json{{"layer", r.layer_id},
           {"filters_before", r.filters_before},
           {"filters_after", r.filters_after},
           {"removed", r.removed},
           {"successors", r.successors},
           {"params_before", r.params_before},
           {"params_after", r.params_after},
           {"macs_before", r.macs_before},
           {"macs_after", r.macs_after}};
}

void from_json(const json& j, SurgeryRecord& r) {
  j.at("layer").get_to(r.layer_id);
  j.at("filters_before").get_to(r.filters_before);
  j.at("filters_after").get_to(r.filters_after);
  j.at("removed").get_to(r.removed);
  j.at("successors").get_to(r.successors);
  j.at("params_before").get_to(r.params_before);
  j.at("params_after").get_to(r.params_after);
  j.at("macs_before").get_to(r.macs_before);
  j.at("macs_after").get_to(r.macs_after);
}

void to_json(json& j, const PlanEntry& e) { j = json{{"layer", e.layer_id}, {"keep", e.keep}}; }

void from_json(const json& j, PlanEntry& e) {
  j.at("layer").get_to(e.layer_id);
  j.at("keep").get_to(e.keep);
}

void to_json(json& j, const PruningPlan& p) {
  j = json{{"criterion", p.criterion},
           {"m_percent", p.m_percent},
           {"layers", p.layers},
           {"per_layer_epochs", p.per_layer_epochs},
           {"final_epochs", p.final_epochs},
           {"per_layer_fraction", p.per_layer_fraction},
           {"final_fraction", p.final_fraction},
           {"train_seed", p.train_seed},
           {"criterion_seed", p.criterion_seed}};
}

void to_json(json& j, const LayerRecord& r) {
  j = json{{"layer", r.layer_id},
           {"filters_before", r.filters_before},
           {"filters_after", r.filters_after},
           {"after_surgery", r.after_surgery},
           {"after_finetune", r.after_finetune}};
}

void from_json(const json& j, LayerRecord& r) {
  j.at("layer").get_to(r.layer_id);
  j.at("filters_before").get_to(r.filters_before);
  j.at("filters_after").get_to(r.filters_after);
  j.at("after_surgery").get_to(r.after_surgery);
  j.at("after_finetune").get_to(r.after_finetune);
}

void to_json(json& j, const RecoveryTrace& t) {
  j = json{{"criterion", t.criterion},
           {"m_percent", t.m_percent},
           {"criterion_seed", t.criterion_seed},
           {"baseline", t.baseline},
           {"layers", t.layers},
           {"final_curve", t.final_curve},
           {"final_accuracy", t.final_accuracy},
           {"recovery_epoch", t.recovery_epoch()}};
  if (t.test_accuracy) j["test_accuracy"] = *t.test_accuracy;
}

void to_json(json& j, const EpochStats& e) {
  j = json{{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}};
  if (e.valid_accuracy) j["valid_accuracy"] = *e.valid_accuracy;
}

void to_json(json& j, const ScoreVector& s) {
  j = json{{"layer", s.layer_id}, {"criterion", s.criterion}, {"scores", s.scores}};
  if (s.meta.bins) j["bins"] = s.meta.bins;
  if (s.meta.seed) j["seed"] = *s.meta.seed;
  if (!s.meta.class_subset.empty()) j["class_subset"] = s.meta.class_subset;
  if (!s.meta.raw_apoz.empty()) j["raw_apoz"] = s.meta.raw_apoz;
}

void to_json(json& j, const FlopReport& f) {
  json layers = json::array();
  for (const LayerFlops& l : f.layers) {
    layers.push_back({{"layer", l.id}, {"kind", layer_kind_name(l.kind)}, {"macs", l.macs},
                      {"params", l.params}});
  }
  j = json{{"layers", layers},
           {"total_macs", f.total_macs},
           {"total_flops", f.total_flops()},
           {"total_params", f.total_params}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

std::string format_traces_csv(const std::vector<RecoveryTrace>& traces) {
  std::ostringstream os;
  os << "criterion,m,seed,phase,step,layer,accuracy\n";
  for (const RecoveryTrace& t : traces) {
    const std::string head =
        t.criterion + "," + std::to_string(t.m_percent) + "," + std::to_string(t.criterion_seed) + ",";
    os << head << "baseline,0,," << format_double(t.baseline) << '\n';
    for (std::size_t i = 0; i < t.layers.size(); ++i) {
      const LayerRecord& r = t.layers[i];
      os << head << "surgery," << i + 1 << ',' << r.layer_id << ','
         << format_double(r.after_surgery) << '\n';
      os << head << "finetune," << i + 1 << ',' << r.layer_id << ','
         << format_double(r.after_finetune) << '\n';
    }
    for (std::size_t e = 0; e < t.final_curve.size(); ++e) {
      os << head << "final_epoch," << e + 1 << ",," << format_double(t.final_curve[e]) << '\n';
    }
    os << head << "final,0,," << format_double(t.final_accuracy) << '\n';
  }
  return os.str();
}

std::string format_curve_csv(const std::vector<EpochStats>& curve) {
  std::ostringstream os;
  os << "epoch,loss,train_accuracy,valid_accuracy\n";
  for (const EpochStats& e : curve) {
    os << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.train_accuracy) << ','
       << (e.valid_accuracy ? format_double(*e.valid_accuracy) : "") << '\n';
  }
  return os.str();
}

std::string format_surgeries_csv(const std::vector<SurgeryRecord>& records) {
  std::ostringstream os;
  os << "layer,filters_before,filters_after,params_before,params_after,macs_before,macs_after\n";
  for (const SurgeryRecord& r : records) {
    os << r.layer_id << ',' << r.filters_before << ',' << r.filters_after << ','
       << r.params_before << ',' << r.params_after << ',' << r.macs_before << ','
       << r.macs_after << '\n';
  }
  return os.str();
}

}  // namespace fprune
