// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Scenario files: YAML with nested sections and SI units in key names.
// Parsing collects every schema violation before failing.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "levmag/cli/io.hpp"
#include "levmag/constants.hpp"
#include "levmag/dynamics.hpp"
#include "levmag/errors.hpp"
#include "levmag/magnetostatics.hpp"
#include "levmag/measurement.hpp"
#include "levmag/spectral.hpp"
#include "levmag/spin_coupling.hpp"

namespace levmag::cli {

/// Configuration error carrying every violation found.
class SchemaError : public ConfigError {
 public:
  explicit SchemaError(std::vector<std::string> issues)
      : ConfigError(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = std::to_string(v.size()) + " scenario error(s)";
    for (const auto& i : v) s += "\n  - " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

enum class Pipeline { coupling, ringdown, thermal };

inline const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::coupling: return "coupling";
    case Pipeline::ringdown: return "ringdown";
    case Pipeline::thermal: return "thermal";
  }
  return "?";
}

struct TrapSpec {
  /// Either the cooldown height or the target levitation height is given;
  /// the other follows from the equilibrium condition.
  bool height_is_levitation = true;
  double height_m = 0;
  /// When set, the levitation height is h_norm * radius (overrides height_m).
  std::optional<double> h_norm;
  double lateral_x_m = 0;
  double lateral_y_m = 0;
  Vec3 orientation = Vec3::UnitZ(); // follows the magnet's moment direction
  bool gravity = true;
};

struct NvSpec {
  NVProbe probe;
  /// When set, the NV sits at distance radius + gap along `direction`.
  std::optional<double> gap_m;
  /// When set, the gap is gap_over_radius * radius (overrides gap_m).
  std::optional<double> gap_over_radius;
  Vec3 direction = Vec3::UnitZ();
  std::string coupling_mode = "z";
};

struct ModeOverride {
  std::string label;
  std::optional<double> frequency_Hz;
  double Q = 1e6;
  std::optional<double> mass_kg;
};

struct DriveEntry {
  std::string mode;
  DriveSpec spec;
  /// Alternative to a force PSD: the in-band drive is sized so the mode
  /// settles at this effective temperature.
  std::optional<double> effective_temperature_K;
};

struct SimulationSpec {
  double temperature_K = 300;
  double duration_s = 1;
  std::optional<double> dt_s;
  bool thermal_start = true;
};

struct RingdownSpec {
  std::string mode = "y";
  double drive_amplitude_N = 1e-12;
  std::optional<double> t_on_s;  // default 5 Q / omega
  std::optional<double> t_off_s; // default 2 Q / omega
  std::optional<double> q_guess; // default: the configured Q
};

struct NvChannelSpec {
  /// Injected lambda_g / 2 pi [Hz]; unset = use the geometric coupling.
  std::optional<double> coupling_Hz;
  double bin_time_s = 1e-3;
  /// Microwave detuning from the static resonance [Hz]; unset = steepest slope.
  std::optional<double> microwave_detuning_Hz;
  bool calibration_enabled = true;
  double calibration_deviation_Hz = 1e5;
  double calibration_offset_Hz = 5; // tone at f_mode + offset
  double frequency_offset_Hz = 0;   // NV sees the mode shifted by this
};

struct AnalysisSpec {
  double psd_segment_s = 100;
  double overlap = 0.5;
  Window window = Window::hann;
  double band_halfwidth_Hz = 1;
  double peak_search_Hz = 2;
  FloorModel floor = FloorModel::median_sidebands;
  std::size_t sideband_bins = 10;
  double energy_window_s = 0.5;
  double energy_stride_s = 0; // 0 = back to back
  double ks_alpha = 0.01;
  std::size_t odmr_points = 201;
  double odmr_span_Hz = 3e7;
  double odmr_integration_s = 1.0;
};

struct DesignSpec {
  double gap_m = 0.25e-6;
  double Q = 1e6;
  std::optional<double> temperature_K; // default: simulation temperature
  double T2_s = 1;
  double B0_T = 0.01;
  double alpha_Hz_m = 15e3 * 1e-6; // omega / 2 pi = alpha a^-n
  double scaling_n = 1;
  std::optional<double> lambda_g_Hz; // override of the computed coupling
};

struct SweepAxis {
  std::string parameter;
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes; // cartesian product, first axis outermost
};

enum class TraceOutput { none, measured, all };

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Pipeline pipeline = Pipeline::thermal;
  PhysicalConstants constants;
  Magnet magnet{15.1e-6, 7430, 0.75 / 1.25663706212e-6, Vec3::UnitZ()};
  TrapSpec trap;
  NvSpec nv;
  std::vector<ModeOverride> modes;
  std::vector<DriveEntry> drives;
  SimulationSpec simulation;
  RingdownSpec ringdown;
  CameraModel camera;
  NvChannelSpec nv_channel;
  AnalysisSpec analysis;
  DesignSpec design;
  std::optional<SweepSpec> sweep;
  TraceOutput traces = TraceOutput::measured;

  const ModeOverride* mode(const std::string& label) const {
    for (const auto& m : modes)
      if (m.label == label) return &m;
    return nullptr;
  }
  const DriveEntry* drive(const std::string& label) const {
    for (const auto& d : drives)
      if (d.mode == label) return &d;
    return nullptr;
  }
  double design_temperature() const {
    return design.temperature_K.value_or(simulation.temperature_K);
  }
  double target_height() const {
    return trap.h_norm ? *trap.h_norm * magnet.radius : trap.height_m;
  }
  std::optional<double> nv_gap() const {
    if (nv.gap_over_radius) return *nv.gap_over_radius * magnet.radius;
    return nv.gap_m;
  }
  /// NV probe with its position resolved from the gap settings.
  NVProbe nv_probe() const {
    NVProbe p = nv.probe;
    if (const auto g = nv_gap()) p.position_rel_magnet = nv.direction * (magnet.radius + *g);
    return p;
  }
};

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> p = {
      "radius_m", "h_norm", "levitation_height_m", "gap_m", "gap_over_radius",
      "B0_T", "Q", "temperature_K", "T2_s", "mass_density_kg_per_m3",
      "mu0_magnetization_T"};
  return p;
}

namespace detail {

class SchemaReader {
 public:
  std::vector<std::string> issues;

  void issue(const std::string& path, const std::string& what) {
    issues.push_back(path + ": " + what);
  }

  /// Flags keys of map `n` not in `allowed`. Returns false if `n` is
  /// present but not a map.
  bool check_map(const YAML::Node& n, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    if (!n || n.IsNull()) return true;
    if (!n.IsMap()) {
      issue(path, "expected a mapping");
      return false;
    }
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(allowed.begin(), allowed.end(),
                       [&](const char* a) { return key == a; }))
        issue(join(path, key), "unknown key");
    }
    return true;
  }

  /// True when `key` is set; an explicit null means "unset", so serialized
  /// scenarios (which write unset optionals as null) read back unchanged.
  static bool present(const YAML::Node& parent, const char* key) {
    return parent && parent.IsMap() && parent[key] && !parent[key].IsNull();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::optional<double> opt_number(const YAML::Node& parent, const std::string& path,
                                   const char* key,
                                   const std::function<bool(double)>& ok = {},
                                   const char* requirement = "") {
    if (!present(parent, key)) return std::nullopt;
    const auto node = parent[key];
    const std::string p = join(path, key);
    if (!node.IsScalar()) {
      issue(p, "expected a number");
      return std::nullopt;
    }
    double v = 0;
    try {
      v = node.as<double>();
    } catch (const YAML::Exception&) {
      issue(p, "expected a number, got '" + node.Scalar() + "'");
      return std::nullopt;
    }
    if (!std::isfinite(v)) {
      issue(p, "must be finite");
      return std::nullopt;
    }
    if (ok && !ok(v)) {
      issue(p, std::string("must be ") + requirement);
      return std::nullopt;
    }
    return v;
  }

  double number(const YAML::Node& parent, const std::string& path, const char* key,
                double fallback, const std::function<bool(double)>& ok = {},
                const char* requirement = "") {
    return opt_number(parent, path, key, ok, requirement).value_or(fallback);
  }

  double required_number(const YAML::Node& parent, const std::string& path,
                         const char* key, const std::function<bool(double)>& ok = {},
                         const char* requirement = "") {
    if (!present(parent, key)) {
      issue(join(path, key), "required");
      return 0;
    }
    return opt_number(parent, path, key, ok, requirement).value_or(0);
  }

  bool boolean(const YAML::Node& parent, const std::string& path, const char* key,
               bool fallback) {
    if (!present(parent, key)) return fallback;
    try {
      return parent[key].as<bool>();
    } catch (const YAML::Exception&) {
      issue(join(path, key), "expected true or false");
      return fallback;
    }
  }

  std::optional<std::string> opt_string(const YAML::Node& parent, const std::string& path,
                                        const char* key,
                                        const std::vector<std::string>& choices = {}) {
    if (!present(parent, key)) return std::nullopt;
    const auto node = parent[key];
    if (!node.IsScalar()) {
      issue(join(path, key), "expected a string");
      return std::nullopt;
    }
    const std::string v = node.Scalar();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      issue(join(path, key), "must be one of {" + list + "}, got '" + v + "'");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::vector<double>> opt_list(const YAML::Node& parent,
                                              const std::string& path, const char* key,
                                              std::size_t expected_size = 0) {
    if (!present(parent, key)) return std::nullopt;
    const auto node = parent[key];
    const std::string p = join(path, key);
    if (!node.IsSequence()) {
      issue(p, "expected a list of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      try {
        const double v = node[i].as<double>();
        if (!std::isfinite(v)) throw YAML::Exception(YAML::Mark(), "non-finite");
        out.push_back(v);
      } catch (const YAML::Exception&) {
        issue(p + "[" + std::to_string(i) + "]", "expected a finite number");
        return std::nullopt;
      }
    }
    if (expected_size && out.size() != expected_size) {
      issue(p, "expected " + std::to_string(expected_size) + " entries");
      return std::nullopt;
    }
    return out;
  }

  std::optional<Vec3> opt_vec3(const YAML::Node& parent, const std::string& path,
                               const char* key, bool unit = false) {
    const auto l = opt_list(parent, path, key, 3);
    if (!l) return std::nullopt;
    Vec3 v((*l)[0], (*l)[1], (*l)[2]);
    if (unit) {
      if (!(v.norm() > 0)) {
        issue(join(path, key), "direction must be non-zero");
        return std::nullopt;
      }
      v.normalize();
    }
    return v;
  }
};

inline bool positive(double v) { return v > 0; }
inline bool non_negative(double v) { return v >= 0; }

inline const std::vector<std::string>& mode_labels() {
  static const std::vector<std::string> l = {"x", "y", "z", "libration"};
  return l;
}

/// Grid from either `values: [...]` or `range: {start, stop, points, spacing}`.
inline std::optional<std::vector<double>> parse_grid(SchemaReader& r, const YAML::Node& n,
                                                     const std::string& path) {
  std::vector<double> values;
  if (n["values"]) {
    auto v = r.opt_list(n, path, "values");
    if (!v) return std::nullopt;
    values = *v;
  } else if (n["range"]) {
    const auto rn = n["range"];
    const std::string rp = path + ".range";
    if (!r.check_map(rn, rp, {"start", "stop", "points", "spacing"})) return std::nullopt;
    const double start = r.required_number(rn, rp, "start");
    const double stop = r.required_number(rn, rp, "stop");
    const double pts = r.required_number(
        rn, rp, "points", [](double v) { return v >= 1 && v == std::floor(v); },
        "a positive integer");
    const auto spacing = r.opt_string(rn, rp, "spacing", {"linear", "log"}).value_or("linear");
    if (pts < 1) return std::nullopt;
    const auto np = static_cast<std::size_t>(pts);
    if (spacing == "log" && !(start > 0 && stop > 0)) {
      r.issue(rp, "log spacing needs positive start and stop");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < np; ++i) {
      const double t = np == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(np - 1);
      values.push_back(spacing == "log"
                           ? std::exp(std::log(start) + t * (std::log(stop) - std::log(start)))
                           : start + t * (stop - start));
    }
  } else {
    r.issue(path, "needs 'values' or 'range'");
    return std::nullopt;
  }
  if (values.empty()) {
    r.issue(path, "grid must not be empty");
    return std::nullopt;
  }
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < values.size(); ++i) {
    inc = inc && values[i] > values[i - 1];
    dec = dec && values[i] < values[i - 1];
  }
  if (values.size() > 1 && !inc && !dec) {
    r.issue(path, "grid must be strictly monotone");
    return std::nullopt;
  }
  return values;
}

} // namespace detail

/// Builds a Scenario from a YAML document, reporting all violations at once.
inline Scenario parse_scenario(const YAML::Node& root) {
  using detail::non_negative;
  using detail::positive;
  detail::SchemaReader r;
  Scenario s;
  if (!root || !root.IsMap()) throw SchemaError({"<root>: expected a mapping"});
  r.check_map(root, "", {"name", "seed", "pipeline", "constants", "magnet", "trap", "nv",
                         "modes", "drives", "simulation", "ringdown", "measurement",
                         "analysis", "design", "sweep", "output"});

  if (auto v = r.opt_string(root, "", "name")) s.name = *v;
  if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
    r.issue("name", "must be a non-empty file-name-safe string");
  if (root["seed"]) {
    try {
      s.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      r.issue("seed", "expected a non-negative integer");
    }
  }
  if (auto v = r.opt_string(root, "", "pipeline", {"coupling", "ringdown", "thermal"}))
    s.pipeline = *v == "coupling" ? Pipeline::coupling
                 : *v == "ringdown" ? Pipeline::ringdown
                                     : Pipeline::thermal;

  // constants
  {
    const auto n = root["constants"];
    const std::string p = "constants";
    r.check_map(n, p, {"hbar_J_s", "kB_J_per_K", "mu0_T_m_per_A", "gamma_e_rad_per_s_T",
                       "gamma_0_rad_per_s_T", "g_m_per_s2"});
    auto& c = s.constants;
    c.hbar = r.number(n, p, "hbar_J_s", c.hbar, positive, "> 0");
    c.kB = r.number(n, p, "kB_J_per_K", c.kB, positive, "> 0");
    c.mu0 = r.number(n, p, "mu0_T_m_per_A", c.mu0, positive, "> 0");
    c.gamma_e = r.number(n, p, "gamma_e_rad_per_s_T", c.gamma_e, positive, "> 0");
    c.gamma_0 = r.number(n, p, "gamma_0_rad_per_s_T", c.gamma_0, positive, "> 0");
    c.g = r.number(n, p, "g_m_per_s2", c.g, positive, "> 0");
  }

  // magnet
  {
    const auto n = root["magnet"];
    const std::string p = "magnet";
    r.check_map(n, p, {"radius_m", "mass_density_kg_per_m3", "magnetization_A_per_m",
                       "mu0_magnetization_T", "moment_direction"});
    auto& m = s.magnet;
    m.radius = r.number(n, p, "radius_m", m.radius, positive, "> 0");
    m.mass_density = r.number(n, p, "mass_density_kg_per_m3", m.mass_density, positive, "> 0");
    const auto mag = r.opt_number(n, p, "magnetization_A_per_m", positive, "> 0");
    const auto b = r.opt_number(n, p, "mu0_magnetization_T", positive, "> 0");
    if (mag && b) r.issue(p, "give magnetization_A_per_m or mu0_magnetization_T, not both");
    if (mag) m.magnetization = *mag;
    else if (b) m.magnetization = *b / s.constants.mu0;
    else m.magnetization = 0.75 / s.constants.mu0;
    if (auto d = r.opt_vec3(n, p, "moment_direction", true)) m.moment_direction = *d;
  }

  // trap
  {
    const auto n = root["trap"];
    const std::string p = "trap";
    r.check_map(n, p, {"levitation_height_m", "levitation_height_over_radius",
                       "cooldown_height_m", "lateral_position_m", "gravity"});
    const auto lh = r.opt_number(n, p, "levitation_height_m", positive, "> 0");
    const auto lhn = r.opt_number(n, p, "levitation_height_over_radius",
                                  [](double v) { return v > 1; }, "> 1");
    const auto ch = r.opt_number(n, p, "cooldown_height_m", positive, "> 0");
    const int given = (lh ? 1 : 0) + (lhn ? 1 : 0) + (ch ? 1 : 0);
    if (given > 1)
      r.issue(p, "give exactly one of levitation_height_m, levitation_height_over_radius, "
                 "cooldown_height_m");
    s.trap.height_is_levitation = !ch;
    if (ch || lh) s.trap.height_m = ch ? *ch : *lh;
    else s.trap.h_norm = lhn.value_or(3.0);
    if (auto v = r.opt_list(n, p, "lateral_position_m", 2)) {
      s.trap.lateral_x_m = (*v)[0];
      s.trap.lateral_y_m = (*v)[1];
    }
    s.trap.orientation = s.magnet.moment_direction;
    s.trap.gravity = r.boolean(n, p, "gravity", true);
  }

  // nv
  {
    const auto n = root["nv"];
    const std::string p = "nv";
    r.check_map(n, p, {"position_rel_magnet_m", "gap_m", "gap_over_radius", "direction", "axis",
                       "zero_field_splitting_Hz", "contrast", "linewidth_hwhm_Hz",
                       "bright_rate_counts_per_s", "bias_field_T", "coupling_mode"});
    auto& nv = s.nv;
    const auto pos = r.opt_vec3(n, p, "position_rel_magnet_m");
    nv.gap_m = r.opt_number(n, p, "gap_m", positive, "> 0");
    nv.gap_over_radius = r.opt_number(n, p, "gap_over_radius", positive, "> 0");
    if ((pos ? 1 : 0) + (nv.gap_m ? 1 : 0) + (nv.gap_over_radius ? 1 : 0) > 1)
      r.issue(p, "give one of position_rel_magnet_m, gap_m, gap_over_radius");
    if (auto d = r.opt_vec3(n, p, "direction", true)) nv.direction = *d;
    if (pos) nv.probe.position_rel_magnet = *pos;
    if (!pos && !nv.gap_m && !nv.gap_over_radius) nv.gap_over_radius = 5.0;
    if (auto a = r.opt_vec3(n, p, "axis", true)) nv.probe.axis = *a;
    nv.probe.zero_field_splitting =
        kTwoPi * r.number(n, p, "zero_field_splitting_Hz", 2.87e9, positive, "> 0");
    nv.probe.contrast = r.number(n, p, "contrast", nv.probe.contrast,
                                 [](double v) { return v > 0 && v < 1; }, "in (0, 1)");
    nv.probe.linewidth =
        kTwoPi * r.number(n, p, "linewidth_hwhm_Hz", nv.probe.linewidth / kTwoPi, positive, "> 0");
    nv.probe.bright_rate =
        r.number(n, p, "bright_rate_counts_per_s", nv.probe.bright_rate, positive, "> 0");
    if (auto b = r.opt_vec3(n, p, "bias_field_T")) nv.probe.bias_field = *b;
    if (auto m = r.opt_string(n, p, "coupling_mode", {"x", "y", "z"})) nv.coupling_mode = *m;
  }

  // modes
  if (const auto n = root["modes"]) {
    if (!n.IsSequence()) {
      r.issue("modes", "expected a list");
    } else {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < n.size(); ++i) {
        const auto e = n[i];
        const std::string p = "modes[" + std::to_string(i) + "]";
        if (!r.check_map(e, p, {"label", "frequency_Hz", "Q", "mass_kg"})) continue;
        ModeOverride m;
        if (auto l = r.opt_string(e, p, "label", detail::mode_labels())) m.label = *l;
        else if (!e["label"]) r.issue(p + ".label", "required");
        if (!m.label.empty() && !seen.insert(m.label).second)
          r.issue(p + ".label", "duplicate mode '" + m.label + "'");
        m.frequency_Hz = r.opt_number(e, p, "frequency_Hz", positive, "> 0");
        m.Q = r.number(e, p, "Q", m.Q, positive, "> 0");
        m.mass_kg = r.opt_number(e, p, "mass_kg", positive, "> 0");
        s.modes.push_back(m);
      }
    }
  }

  // drives
  if (const auto n = root["drives"]) {
    if (!n.IsSequence()) {
      r.issue("drives", "expected a list");
    } else {
      for (std::size_t i = 0; i < n.size(); ++i) {
        const auto e = n[i];
        const std::string p = "drives[" + std::to_string(i) + "]";
        if (!r.check_map(e, p, {"mode", "kind", "band_Hz", "force_psd_N2_per_Hz",
                                "effective_temperature_K", "frequency_Hz", "amplitude_N",
                                "on_s", "off_s"}))
          continue;
        DriveEntry d;
        if (auto m = r.opt_string(e, p, "mode", detail::mode_labels())) d.mode = *m;
        else if (!e["mode"]) r.issue(p + ".mode", "required");
        const auto kind = r.opt_string(e, p, "kind", {"none", "broadband", "tone"}).value_or("none");
        if (kind == "broadband") {
          d.spec.kind = DriveKind::broadband;
          if (auto b = r.opt_list(e, p, "band_Hz", 2)) {
            d.spec.band_lo = (*b)[0];
            d.spec.band_hi = (*b)[1];
            if (!(d.spec.band_lo >= 0 && d.spec.band_lo < d.spec.band_hi))
              r.issue(p + ".band_Hz", "needs 0 <= low < high");
          } else if (!e["band_Hz"]) {
            r.issue(p + ".band_Hz", "required for broadband drives");
          }
          const auto psd = r.opt_number(e, p, "force_psd_N2_per_Hz", non_negative, ">= 0");
          d.effective_temperature_K =
              r.opt_number(e, p, "effective_temperature_K", non_negative, ">= 0");
          if (psd && d.effective_temperature_K)
            r.issue(p, "give force_psd_N2_per_Hz or effective_temperature_K, not both");
          d.spec.force_psd = psd.value_or(0);
        } else if (kind == "tone") {
          d.spec.kind = DriveKind::tone;
          d.spec.tone_frequency = r.required_number(e, p, "frequency_Hz", non_negative, ">= 0");
          d.spec.tone_amplitude = r.required_number(e, p, "amplitude_N", non_negative, ">= 0");
          d.spec.drive_on = r.number(e, p, "on_s", 0.0, non_negative, ">= 0");
          d.spec.drive_off = r.number(e, p, "off_s", d.spec.drive_off, non_negative, ">= 0");
          if (!(d.spec.drive_on <= d.spec.drive_off)) r.issue(p, "on_s must not exceed off_s");
        }
        s.drives.push_back(d);
      }
      std::set<std::string> seen;
      for (const auto& d : s.drives)
        if (!d.mode.empty() && !seen.insert(d.mode).second)
          r.issue("drives", "more than one drive for mode '" + d.mode + "'");
    }
  }

  // simulation
  {
    const auto n = root["simulation"];
    const std::string p = "simulation";
    r.check_map(n, p, {"temperature_K", "duration_s", "dt_s", "thermal_start"});
    auto& sim = s.simulation;
    sim.temperature_K = r.number(n, p, "temperature_K", sim.temperature_K, non_negative, ">= 0");
    sim.duration_s = r.number(n, p, "duration_s", sim.duration_s, positive, "> 0");
    sim.dt_s = r.opt_number(n, p, "dt_s", positive, "> 0");
    sim.thermal_start = r.boolean(n, p, "thermal_start", sim.thermal_start);
  }

  // ringdown
  {
    const auto n = root["ringdown"];
    const std::string p = "ringdown";
    r.check_map(n, p, {"mode", "drive_amplitude_N", "t_on_s", "t_off_s", "q_guess"});
    auto& rd = s.ringdown;
    if (auto m = r.opt_string(n, p, "mode", detail::mode_labels())) rd.mode = *m;
    rd.drive_amplitude_N = r.number(n, p, "drive_amplitude_N", rd.drive_amplitude_N,
                                    non_negative, ">= 0");
    rd.t_on_s = r.opt_number(n, p, "t_on_s", positive, "> 0");
    rd.t_off_s = r.opt_number(n, p, "t_off_s", positive, "> 0");
    rd.q_guess = r.opt_number(n, p, "q_guess", positive, "> 0");
  }

  // measurement
  {
    const auto n = root["measurement"];
    r.check_map(n, "measurement", {"camera", "nv_channel"});
    const auto cam = n ? n["camera"] : YAML::Node();
    const std::string cp = "measurement.camera";
    r.check_map(cam, cp, {"frame_rate_Hz", "read_noise_m", "projection"});
    s.camera.frame_rate = r.number(cam, cp, "frame_rate_Hz", s.camera.frame_rate, positive, "> 0");
    s.camera.read_noise_rms = r.number(cam, cp, "read_noise_m", 0.0, non_negative, ">= 0");
    if (cam && cam.IsMap() && cam["projection"]) {
      const auto pr = cam["projection"];
      if (!pr.IsSequence() || pr.size() != 2) {
        r.issue(cp + ".projection", "expected two rows of three numbers");
      } else {
        for (int row = 0; row < 2; ++row) {
          YAML::Node wrap;
          wrap["row"] = pr[row];
          if (auto v = r.opt_list(wrap, cp + ".projection", "row", 3))
            for (int c = 0; c < 3; ++c) s.camera.projection(row, c) = (*v)[static_cast<std::size_t>(c)];
        }
        Eigen::FullPivLU<Eigen::Matrix<double, 2, 3>> lu(s.camera.projection);
        if (lu.rank() < 2) r.issue(cp + ".projection", "must have rank 2");
      }
    }
    const auto nc = n ? n["nv_channel"] : YAML::Node();
    const std::string np = "measurement.nv_channel";
    r.check_map(nc, np, {"coupling_Hz", "bin_time_s", "microwave_detuning_Hz",
                         "calibration", "frequency_offset_Hz"});
    auto& ch = s.nv_channel;
    ch.coupling_Hz = r.opt_number(nc, np, "coupling_Hz", non_negative, ">= 0");
    ch.bin_time_s = r.number(nc, np, "bin_time_s", ch.bin_time_s, positive, "> 0");
    ch.microwave_detuning_Hz = r.opt_number(nc, np, "microwave_detuning_Hz");
    ch.frequency_offset_Hz = r.number(nc, np, "frequency_offset_Hz", 0.0);
    const auto cal = nc ? nc["calibration"] : YAML::Node();
    const std::string calp = np + ".calibration";
    r.check_map(cal, calp, {"enabled", "deviation_Hz", "offset_Hz"});
    ch.calibration_enabled = r.boolean(cal, calp, "enabled", ch.calibration_enabled);
    ch.calibration_deviation_Hz =
        r.number(cal, calp, "deviation_Hz", ch.calibration_deviation_Hz, positive, "> 0");
    ch.calibration_offset_Hz = r.number(cal, calp, "offset_Hz", ch.calibration_offset_Hz);
  }

  // analysis
  {
    const auto n = root["analysis"];
    const std::string p = "analysis";
    r.check_map(n, p, {"psd_segment_s", "overlap", "window", "band_halfwidth_Hz",
                       "peak_search_Hz", "floor", "sideband_bins", "energy_window_s",
                       "energy_stride_s", "ks_alpha", "odmr_points", "odmr_span_Hz",
                       "odmr_integration_s"});
    auto& a = s.analysis;
    a.psd_segment_s = r.number(n, p, "psd_segment_s", a.psd_segment_s, positive, "> 0");
    a.overlap = r.number(n, p, "overlap", a.overlap, [](double v) { return v >= 0 && v < 1; },
                         "in [0, 1)");
    if (auto w = r.opt_string(n, p, "window", {"hann", "rectangular"}))
      a.window = *w == "hann" ? Window::hann : Window::rectangular;
    a.band_halfwidth_Hz = r.number(n, p, "band_halfwidth_Hz", a.band_halfwidth_Hz, positive, "> 0");
    a.peak_search_Hz = r.number(n, p, "peak_search_Hz", a.peak_search_Hz, non_negative, ">= 0");
    if (auto f = r.opt_string(n, p, "floor", {"median_sidebands", "none"}))
      a.floor = *f == "none" ? FloorModel::none : FloorModel::median_sidebands;
    a.sideband_bins = static_cast<std::size_t>(r.number(
        n, p, "sideband_bins", static_cast<double>(a.sideband_bins),
        [](double v) { return v >= 1 && v == std::floor(v); }, "a positive integer"));
    a.energy_window_s = r.number(n, p, "energy_window_s", a.energy_window_s, positive, "> 0");
    a.energy_stride_s = r.number(n, p, "energy_stride_s", a.energy_stride_s, non_negative, ">= 0");
    if (a.energy_stride_s > 0 && a.energy_stride_s < a.energy_window_s)
      r.issue(p + ".energy_stride_s", "must be 0 or >= energy_window_s");
    a.ks_alpha = r.number(n, p, "ks_alpha", a.ks_alpha, [](double v) { return v > 0 && v < 1; },
                          "in (0, 1)");
    a.odmr_points = static_cast<std::size_t>(r.number(
        n, p, "odmr_points", static_cast<double>(a.odmr_points),
        [](double v) { return v >= 5 && v == std::floor(v); }, "an integer >= 5"));
    a.odmr_span_Hz = r.number(n, p, "odmr_span_Hz", a.odmr_span_Hz, positive, "> 0");
    a.odmr_integration_s =
        r.number(n, p, "odmr_integration_s", a.odmr_integration_s, non_negative, ">= 0");
  }

  // design
  {
    const auto n = root["design"];
    const std::string p = "design";
    r.check_map(n, p, {"gap_m", "Q", "temperature_K", "T2_s", "B0_T", "alpha_Hz_m",
                       "scaling_n", "lambda_g_Hz"});
    auto& d = s.design;
    d.gap_m = r.number(n, p, "gap_m", d.gap_m, positive, "> 0");
    d.Q = r.number(n, p, "Q", d.Q, positive, "> 0");
    d.temperature_K = r.opt_number(n, p, "temperature_K", positive, "> 0");
    d.T2_s = r.number(n, p, "T2_s", d.T2_s, positive, "> 0");
    d.B0_T = r.number(n, p, "B0_T", d.B0_T, non_negative, ">= 0");
    d.alpha_Hz_m = r.number(n, p, "alpha_Hz_m", d.alpha_Hz_m, positive, "> 0");
    d.scaling_n = r.number(n, p, "scaling_n", d.scaling_n,
                           [](double v) { return v >= 0 && v < 5; }, "in [0, 5)");
    d.lambda_g_Hz = r.opt_number(n, p, "lambda_g_Hz", non_negative, ">= 0");
  }

  // sweep
  if (const auto n = root["sweep"]) {
    r.check_map(n, "sweep", {"parameters"});
    const auto ps = n.IsMap() ? n["parameters"] : YAML::Node();
    if (!ps || !ps.IsSequence() || ps.size() == 0) {
      r.issue("sweep.parameters", "expected a non-empty list");
    } else {
      SweepSpec sw;
      std::set<std::string> seen;
      for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string p = "sweep.parameters[" + std::to_string(i) + "]";
        if (!r.check_map(ps[i], p, {"name", "values", "range"})) continue;
        SweepAxis ax;
        if (auto nm = r.opt_string(ps[i], p, "name", sweep_parameters())) ax.parameter = *nm;
        else if (!ps[i]["name"]) r.issue(p + ".name", "required");
        if (!ax.parameter.empty() && !seen.insert(ax.parameter).second)
          r.issue(p + ".name", "parameter swept twice");
        if (auto g = detail::parse_grid(r, ps[i], p)) ax.values = *g;
        sw.axes.push_back(ax);
      }
      s.sweep = sw;
    }
  }

  // output
  {
    const auto n = root["output"];
    r.check_map(n, "output", {"traces"});
    if (auto t = r.opt_string(n, "output", "traces", {"none", "measured", "all"}))
      s.traces = *t == "none" ? TraceOutput::none
                 : *t == "all" ? TraceOutput::all
                               : TraceOutput::measured;
  }

  // Cross-field checks.
  if (!(s.nv_probe().position_rel_magnet.norm() > s.magnet.radius))
    r.issue("nv", "NV must lie outside the magnet");
  if (!(s.target_height() > s.magnet.radius))
    r.issue("trap", "height must exceed the magnet radius");
  if (s.simulation.dt_s && *s.simulation.dt_s >= s.simulation.duration_s)
    r.issue("simulation.dt_s", "must be shorter than duration_s");
  if (!r.issues.empty()) throw SchemaError(r.issues);
  return s;
}

inline Scenario parse_scenario_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw SchemaError({std::string("YAML syntax error: ") + e.what()});
  }
  return parse_scenario(root);
}

inline Scenario load_scenario(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SchemaError({"cannot read scenario file " + path.string()});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario_text(ss.str());
}

/// Resolved scenario (all defaults filled in) as JSON.
inline Json scenario_to_json(const Scenario& s) {
  auto vec = [](const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); };
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["pipeline"] = to_string(s.pipeline);
  j["constants"] = {{"hbar_J_s", s.constants.hbar},
                    {"kB_J_per_K", s.constants.kB},
                    {"mu0_T_m_per_A", s.constants.mu0},
                    {"gamma_e_rad_per_s_T", s.constants.gamma_e},
                    {"gamma_0_rad_per_s_T", s.constants.gamma_0},
                    {"g_m_per_s2", s.constants.g}};
  j["magnet"] = {{"radius_m", s.magnet.radius},
                 {"mass_density_kg_per_m3", s.magnet.mass_density},
                 {"magnetization_A_per_m", s.magnet.magnetization},
                 {"moment_direction", vec(s.magnet.moment_direction)}};
  j["trap"] = {{s.trap.height_is_levitation ? "levitation_height_m" : "cooldown_height_m",
                s.target_height()},
               {"lateral_position_m", Json::array({s.trap.lateral_x_m, s.trap.lateral_y_m})},
               {"gravity", s.trap.gravity}};
  j["nv"] = {{"position_rel_magnet_m", vec(s.nv_probe().position_rel_magnet)},
             {"axis", vec(s.nv.probe.axis)},
             {"zero_field_splitting_Hz", s.nv.probe.zero_field_splitting / kTwoPi},
             {"contrast", s.nv.probe.contrast},
             {"linewidth_hwhm_Hz", s.nv.probe.linewidth / kTwoPi},
             {"bright_rate_counts_per_s", s.nv.probe.bright_rate},
             {"bias_field_T", vec(s.nv.probe.bias_field)},
             {"coupling_mode", s.nv.coupling_mode}};
  j["modes"] = Json::array();
  for (const auto& m : s.modes)
    j["modes"].push_back({{"label", m.label}, {"frequency_Hz", opt(m.frequency_Hz)},
                          {"Q", m.Q}, {"mass_kg", opt(m.mass_kg)}});
  j["drives"] = Json::array();
  for (const auto& d : s.drives) {
    Json e = {{"mode", d.mode}};
    switch (d.spec.kind) {
      case DriveKind::broadband:
        e["kind"] = "broadband";
        e["band_Hz"] = Json::array({d.spec.band_lo, d.spec.band_hi});
        if (d.effective_temperature_K) e["effective_temperature_K"] = *d.effective_temperature_K;
        else e["force_psd_N2_per_Hz"] = d.spec.force_psd;
        break;
      case DriveKind::tone:
        e["kind"] = "tone";
        e["frequency_Hz"] = d.spec.tone_frequency;
        e["amplitude_N"] = d.spec.tone_amplitude;
        e["on_s"] = d.spec.drive_on;
        e["off_s"] = json_number(d.spec.drive_off);
        break;
      default:
        e["kind"] = "none";
    }
    j["drives"].push_back(e);
  }
  j["simulation"] = {{"temperature_K", s.simulation.temperature_K},
                     {"duration_s", s.simulation.duration_s},
                     {"dt_s", opt(s.simulation.dt_s)},
                     {"thermal_start", s.simulation.thermal_start}};
  j["ringdown"] = {{"mode", s.ringdown.mode},
                   {"drive_amplitude_N", s.ringdown.drive_amplitude_N},
                   {"t_on_s", opt(s.ringdown.t_on_s)},
                   {"t_off_s", opt(s.ringdown.t_off_s)},
                   {"q_guess", opt(s.ringdown.q_guess)}};
  Json proj = Json::array();
  for (int row = 0; row < 2; ++row)
    proj.push_back(Json::array({s.camera.projection(row, 0), s.camera.projection(row, 1),
                                s.camera.projection(row, 2)}));
  j["measurement"]["camera"] = {{"frame_rate_Hz", s.camera.frame_rate},
                                {"read_noise_m", s.camera.read_noise_rms},
                                {"projection", proj}};
  const auto& ch = s.nv_channel;
  j["measurement"]["nv_channel"] = {
      {"coupling_Hz", opt(ch.coupling_Hz)},
      {"bin_time_s", ch.bin_time_s},
      {"microwave_detuning_Hz", opt(ch.microwave_detuning_Hz)},
      {"frequency_offset_Hz", ch.frequency_offset_Hz},
      {"calibration", {{"enabled", ch.calibration_enabled},
                       {"deviation_Hz", ch.calibration_deviation_Hz},
                       {"offset_Hz", ch.calibration_offset_Hz}}}};
  const auto& a = s.analysis;
  j["analysis"] = {{"psd_segment_s", a.psd_segment_s},
                   {"overlap", a.overlap},
                   {"window", to_string(a.window)},
                   {"band_halfwidth_Hz", a.band_halfwidth_Hz},
                   {"peak_search_Hz", a.peak_search_Hz},
                   {"floor", a.floor == FloorModel::none ? "none" : "median_sidebands"},
                   {"sideband_bins", a.sideband_bins},
                   {"energy_window_s", a.energy_window_s},
                   {"energy_stride_s", a.energy_stride_s},
                   {"ks_alpha", a.ks_alpha},
                   {"odmr_points", a.odmr_points},
                   {"odmr_span_Hz", a.odmr_span_Hz},
                   {"odmr_integration_s", a.odmr_integration_s}};
  const auto& d = s.design;
  j["design"] = {{"gap_m", d.gap_m},           {"Q", d.Q},
                 {"temperature_K", s.design_temperature()},
                 {"T2_s", d.T2_s},             {"B0_T", d.B0_T},
                 {"alpha_Hz_m", d.alpha_Hz_m}, {"scaling_n", d.scaling_n},
                 {"lambda_g_Hz", opt(d.lambda_g_Hz)}};
  if (s.sweep) {
    Json axes = Json::array();
    for (const auto& ax : s.sweep->axes) axes.push_back({{"name", ax.parameter}, {"values", ax.values}});
    j["sweep"] = {{"parameters", axes}};
  }
  j["output"] = {{"traces", s.traces == TraceOutput::none       ? "none"
                            : s.traces == TraceOutput::all ? "all"
                                                           : "measured"}};
  return j;
}

} // namespace levmag::cli
