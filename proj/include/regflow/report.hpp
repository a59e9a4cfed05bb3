#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/head_angle.hpp"
#include "regflow/imaging.hpp"
#include "regflow/metrics.hpp"

namespace regflow {

/// Brain / ventricle / lesion masks of one volume; any may be absent.
struct StructureMasks {
  std::optional<LabelMask> brain;
  std::optional<LabelMask> vent;
  std::optional<LabelMask> wml;
};

/// One CSV row. Unset fields are written as empty cells.
struct MetricReport {
  std::string volume;
  std::optional<double> pv_vent;
  std::optional<double> pv_wml;
  std::optional<double> delta_pv_vent;
  std::optional<double> delta_pv_wml;
  std::optional<double> dv_brain;
  std::optional<double> dv_vent;
  std::optional<double> dv_wml;
  std::optional<double> ssd;
  std::optional<double> delta_ssd;
  std::optional<double> head_angle;
  std::optional<double> pwa_total;
  std::optional<double> dsc;
  std::optional<double> mi;
  std::optional<double> r;
  std::optional<double> maid;
  std::optional<double> maid_zp;
  /// Semicolon-separated notes for metrics that could not be computed.
  std::string error;
  /// Set when the volume itself could not be evaluated.
  bool failed = false;
};

inline constexpr const char* kReportHeader =
    "volume,pv_vent,pv_wml,delta_pv_vent,delta_pv_wml,dv_brain,dv_vent,dv_wml,ssd,delta_ssd,head_angle,"
    "pwa_total,dsc,mi,r,maid,maid_zp,error";

namespace detail {

inline void note(MetricReport& rep, const std::string& what, const std::exception& e) {
  if (!rep.error.empty()) rep.error += "; ";
  rep.error += what + ": " + e.what();
}

// Runs fn and stores its value; metric-specific failures become notes.
template <typename Fn>
void try_metric(MetricReport& rep, std::optional<double>& slot, const std::string& what, Fn&& fn) {
  try {
    slot = fn();
  } catch (const Error& e) {
    note(rep, what, e);
  }
}

inline std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

inline std::string csv_text(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = c == ',' ? ';' : ' ';
  }
  return s;
}

}  // namespace detail

/// Every metric that the supplied inputs allow. `registered` masks drive PV
/// and SSD; `original` masks add the before/after comparisons; the fixed
/// brain mask enables DSC.
[[nodiscard]] inline MetricReport evaluate_volume(const std::string& name, const Volume& registered,
                                                  const Volume& fixed, const StructureMasks& reg,
                                                  const StructureMasks& orig, const std::optional<LabelMask>& fixed_brain) {
  MetricReport rep;
  rep.volume = name;
  if (!(registered.dims() == fixed.dims())) {
    throw InvalidArgument("volume " + to_string(registered.dims()) + " does not match fixed " + to_string(fixed.dims()));
  }
  detail::try_metric(rep, rep.pwa_total, "pwa", [&] { return pwa(registered, fixed).total; });
  detail::try_metric(rep, rep.mi, "mi", [&] { return mutual_information(registered, fixed); });
  detail::try_metric(rep, rep.r, "r", [&] { return pearson_r(registered, fixed); });
  detail::try_metric(rep, rep.maid, "maid", [&] { return maid(registered, fixed, 0); });
  detail::try_metric(rep, rep.maid_zp, "maid_zp", [&] { return maid(registered, fixed, kBackgroundBins); });
  detail::try_metric(rep, rep.head_angle, "head_angle", [&] { return head_angle(registered); });

  if (reg.brain) {
    if (fixed_brain) detail::try_metric(rep, rep.dsc, "dsc", [&] { return dsc(*reg.brain, *fixed_brain); });
    if (reg.vent) {
      detail::try_metric(rep, rep.pv_vent, "pv_vent", [&] { return proportional_volume(*reg.vent, *reg.brain); });
      detail::try_metric(rep, rep.ssd, "ssd", [&] { return ssd(*reg.vent, *reg.brain); });
    }
    if (reg.wml) {
      detail::try_metric(rep, rep.pv_wml, "pv_wml", [&] { return proportional_volume(*reg.wml, *reg.brain); });
    }
  }
  if (orig.brain && reg.brain) {
    detail::try_metric(rep, rep.dv_brain, "dv_brain", [&] { return volume_ratio(*orig.brain, *reg.brain); });
    if (orig.vent && reg.vent) {
      detail::try_metric(rep, rep.delta_pv_vent, "delta_pv_vent",
                         [&] { return delta_pv(*orig.vent, *orig.brain, *reg.vent, *reg.brain); });
      detail::try_metric(rep, rep.dv_vent, "dv_vent", [&] { return volume_ratio(*orig.vent, *reg.vent); });
      detail::try_metric(rep, rep.delta_ssd, "delta_ssd",
                         [&] { return delta_ssd(ssd(*orig.vent, *orig.brain), ssd(*reg.vent, *reg.brain)); });
    }
    if (orig.wml && reg.wml) {
      detail::try_metric(rep, rep.delta_pv_wml, "delta_pv_wml",
                         [&] { return delta_pv(*orig.wml, *orig.brain, *reg.wml, *reg.brain); });
      detail::try_metric(rep, rep.dv_wml, "dv_wml", [&] { return volume_ratio(*orig.wml, *reg.wml); });
    }
  }
  return rep;
}

[[nodiscard]] inline std::string report_row(const MetricReport& r) {
  using detail::csv_number;
  std::string s = detail::csv_text(r.volume);
  for (const auto* v : {&r.pv_vent, &r.pv_wml, &r.delta_pv_vent, &r.delta_pv_wml, &r.dv_brain, &r.dv_vent, &r.dv_wml,
                        &r.ssd, &r.delta_ssd, &r.head_angle, &r.pwa_total, &r.dsc, &r.mi, &r.r, &r.maid,
                        &r.maid_zp}) {
    s += ',';
    s += csv_number(*v);
  }
  s += ',';
  s += detail::csv_text(r.error);
  return s;
}

inline void write_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kReportHeader << '\n';
  for (const auto& r : rows) out << report_row(r) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace regflow
