#include "risloc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace risloc {

using nlohmann::json;

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double ScenarioConfig::noise_power_w() const {
  if (noise_power_override_w) return *noise_power_override_w;
  const double n0 = dbm_to_watt(noise_psd_dbm_hz);  // W/Hz
  return n0 / sampling_time_s * db_to_linear(noise_figure_db);
}

Angle2 ScenarioConfig::aoa(int r) const {
  return compute_aod(bs_position, ris[r].position, ris[r].rotation);
}

Angle2 ScenarioConfig::true_aod(int r) const {
  return compute_aod(ue_position, ris[r].position, ris[r].rotation);
}

std::uint64_t ScenarioConfig::hash() const {
  const std::string text = dump_config(*this);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void ScenarioConfig::validate() const {
  if (ris_rows <= 0 || ris_cols <= 0) throw std::invalid_argument("config: RIS dimensions must be positive");
  if (element_spacing_m <= 0.0) throw std::invalid_argument("config: element spacing must be positive");
  if (wavelength_m <= 0.0) throw std::invalid_argument("config: wavelength must be positive");
  if (sampling_time_s <= 0.0) throw std::invalid_argument("config: sampling time must be positive");
  if (num_transmissions <= 0) throw std::invalid_argument("config: transmission count must be positive");
  if (trials <= 0) throw std::invalid_argument("config: trial count must be positive");
  for (const auto& spec : ris)
    if (!is_rotation(spec.rotation, 1e-9))
      throw std::invalid_argument("config: RIS rotation matrix is not a proper rotation");
  if (minimal_code_length(num_ris() + 1, num_transmissions) == 0 &&
      schedule.code_length_override == 0)
    throw std::invalid_argument("config: no Hadamard code length divides the transmission count");
  if (grid.cfo_points <= 0 || grid.cfo_points_nlos_ml <= 0 || grid.aod_fft_size <= 0 ||
      grid.aod_grid_points <= 0)
    throw std::invalid_argument("config: grid point counts must be positive");
  const double range = cfo_range_max_hz();
  if (grid.cfo_min_hz < -range - 1e-9 || grid.cfo_max_hz > range + 1e-9)
    throw std::invalid_argument("config: CFO grid range exceeds +-1/(2 Ts)");
  if (grid.cfo_min_hz > grid.cfo_max_hz)
    throw std::invalid_argument("config: CFO grid range is inverted");
  if (detector.target_pd <= 0.0 || detector.target_pd > 1.0)
    throw std::invalid_argument("config: detector target_pd must lie in (0, 1]");
  if (detector.calibration_trials < 1)
    throw std::invalid_argument("config: detector calibration needs at least one trial");
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("config: expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) { ok = true; break; }
    if (!ok) throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

std::string dump_config(const ScenarioConfig& c) {
  json j;
  json geo;
  geo["bs_position"] = vec3_to_json(c.bs_position);
  geo["ue_position"] = vec3_to_json(c.ue_position);
  json ris_list = json::array();
  for (const auto& spec : c.ris) {
    json r;
    r["position"] = vec3_to_json(spec.position);
    json rot = json::array();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) rot.push_back(spec.rotation(i, k));
    r["rotation"] = rot;
    ris_list.push_back(r);
  }
  geo["ris"] = ris_list;
  geo["ris_rows"] = c.ris_rows;
  geo["ris_cols"] = c.ris_cols;
  geo["element_spacing_m"] = c.element_spacing_m;
  j["geometry"] = geo;

  json wf;
  wf["wavelength_m"] = c.wavelength_m;
  wf["sampling_time_s"] = c.sampling_time_s;
  wf["num_transmissions"] = c.num_transmissions;
  wf["noise_psd_dbm_hz"] = c.noise_psd_dbm_hz;
  wf["noise_figure_db"] = c.noise_figure_db;
  if (c.noise_power_override_w) wf["noise_power_w"] = *c.noise_power_override_w;
  j["waveform"] = wf;

  j["cfo_true_hz"] = c.cfo_true_hz;
  j["power_dbm"] = c.power_dbm;
  j["seed"] = c.seed;
  j["trials"] = c.trials;

  json g;
  g["cfo_min_hz"] = c.grid.cfo_min_hz;
  g["cfo_max_hz"] = c.grid.cfo_max_hz;
  g["cfo_points"] = c.grid.cfo_points;
  g["cfo_points_nlos_ml"] = c.grid.cfo_points_nlos_ml;
  g["aod_method"] = c.grid.aod_method == AodSearchMethod::Fft ? "fft" : "grid";
  g["aod_fft_size"] = c.grid.aod_fft_size;
  g["aod_grid_points"] = c.grid.aod_grid_points;
  g["refine"] = c.grid.refine;
  g["refine_tol"] = c.grid.refine_tol;
  g["refine_max_iters"] = c.grid.refine_max_iters;
  j["grid"] = g;

  json sch;
  sch["code_length"] = c.schedule.code_length_override;
  sch["base_profile"] = c.schedule.base_kind == BaseProfileKind::Random ? "random" : "directional";
  sch["fixed_profiles"] = c.schedule.fixed_profiles;
  j["schedule"] = sch;

  j["estimator"] = c.estimator == EstimatorKind::Los ? "los"
                   : c.estimator == EstimatorKind::NlosMl ? "nlos_ml" : "nlos_lc";

  json det;
  if (c.detector.threshold) det["threshold"] = *c.detector.threshold;
  det["target_pd"] = c.detector.target_pd;
  det["calibration_trials"] = c.detector.calibration_trials;
  det["calibration_power_dbm"] = c.detector.calibration_power_dbm;
  det["variant"] = c.detector.variant == DetectorVariant::Ml ? "ml" : "lc";
  j["detector"] = det;

  json ric;
  ric["kappa_los"] = c.rician.kappa_los;
  ric["kappa_bs_ris"] = c.rician.kappa_bs_ris;
  ric["kappa_ris_ue"] = c.rician.kappa_ris_ue;
  ric["kappa_sweep"] = c.rician.kappa_sweep;
  j["rician"] = ric;

  j["cfo_sweep_hz"] = c.cfo_sweep_hz;
  j["position_refinement"] = c.position_refinement;
  return j.dump(2);
}

ScenarioConfig parse_config(const std::string& text) {
  json j = json::parse(text);
  ScenarioConfig c;
  check_keys(j, {"geometry", "waveform", "cfo_true_hz", "power_dbm", "seed", "trials", "grid",
                 "schedule", "estimator", "detector", "rician", "cfo_sweep_hz",
                 "position_refinement"},
             "top level");

  if (j.contains("geometry")) {
    const json& geo = j["geometry"];
    check_keys(geo, {"bs_position", "ue_position", "ris", "ris_rows", "ris_cols",
                     "element_spacing_m"},
               "geometry");
    if (geo.contains("bs_position")) c.bs_position = vec3_from_json(geo["bs_position"]);
    if (geo.contains("ue_position")) c.ue_position = vec3_from_json(geo["ue_position"]);
    if (geo.contains("ris")) {
      c.ris.clear();
      for (const json& r : geo["ris"]) {
        check_keys(r, {"position", "rotation", "rotation_z_deg"}, "geometry.ris");
        RisSpec spec;
        spec.position = vec3_from_json(r.at("position"));
        if (r.contains("rotation_z_deg"))
          spec.rotation = rot_z(r["rotation_z_deg"].get<double>() * M_PI / 180.0);
        else if (r.contains("rotation")) {
          const json& rot = r["rotation"];
          if (!rot.is_array() || rot.size() != 9)
            throw std::invalid_argument("config: rotation must hold 9 row-major entries");
          for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) spec.rotation(i, k) = rot[3 * i + k].get<double>();
        }
        c.ris.push_back(spec);
      }
    }
    if (geo.contains("ris_rows")) c.ris_rows = geo["ris_rows"].get<int>();
    if (geo.contains("ris_cols")) c.ris_cols = geo["ris_cols"].get<int>();
    if (geo.contains("element_spacing_m")) c.element_spacing_m = geo["element_spacing_m"].get<double>();
  }

  if (j.contains("waveform")) {
    const json& wf = j["waveform"];
    check_keys(wf, {"wavelength_m", "sampling_time_s", "num_transmissions", "noise_psd_dbm_hz",
                    "noise_figure_db", "noise_power_w"},
               "waveform");
    if (wf.contains("wavelength_m")) c.wavelength_m = wf["wavelength_m"].get<double>();
    if (wf.contains("sampling_time_s")) c.sampling_time_s = wf["sampling_time_s"].get<double>();
    if (wf.contains("num_transmissions")) c.num_transmissions = wf["num_transmissions"].get<int>();
    if (wf.contains("noise_psd_dbm_hz")) c.noise_psd_dbm_hz = wf["noise_psd_dbm_hz"].get<double>();
    if (wf.contains("noise_figure_db")) c.noise_figure_db = wf["noise_figure_db"].get<double>();
    if (wf.contains("noise_power_w")) c.noise_power_override_w = wf["noise_power_w"].get<double>();
  }

  if (j.contains("cfo_true_hz")) c.cfo_true_hz = j["cfo_true_hz"].get<double>();
  if (j.contains("power_dbm")) {
    c.power_dbm.clear();
    if (j["power_dbm"].is_array())
      for (const json& p : j["power_dbm"]) c.power_dbm.push_back(p.get<double>());
    else
      c.power_dbm.push_back(j["power_dbm"].get<double>());
  }
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("trials")) c.trials = j["trials"].get<int>();

  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, {"cfo_min_hz", "cfo_max_hz", "cfo_points", "cfo_points_nlos_ml", "aod_method",
                   "aod_fft_size", "aod_grid_points", "refine", "refine_tol", "refine_max_iters"},
               "grid");
    if (g.contains("cfo_min_hz")) c.grid.cfo_min_hz = g["cfo_min_hz"].get<double>();
    if (g.contains("cfo_max_hz")) c.grid.cfo_max_hz = g["cfo_max_hz"].get<double>();
    if (g.contains("cfo_points")) c.grid.cfo_points = g["cfo_points"].get<int>();
    if (g.contains("cfo_points_nlos_ml")) c.grid.cfo_points_nlos_ml = g["cfo_points_nlos_ml"].get<int>();
    if (g.contains("aod_method")) {
      const std::string m = g["aod_method"].get<std::string>();
      if (m == "fft") c.grid.aod_method = AodSearchMethod::Fft;
      else if (m == "grid") c.grid.aod_method = AodSearchMethod::Grid;
      else throw std::invalid_argument("config: aod_method must be 'fft' or 'grid'");
    }
    if (g.contains("aod_fft_size")) c.grid.aod_fft_size = g["aod_fft_size"].get<int>();
    if (g.contains("aod_grid_points")) c.grid.aod_grid_points = g["aod_grid_points"].get<int>();
    if (g.contains("refine")) c.grid.refine = g["refine"].get<bool>();
    if (g.contains("refine_tol")) c.grid.refine_tol = g["refine_tol"].get<double>();
    if (g.contains("refine_max_iters")) c.grid.refine_max_iters = g["refine_max_iters"].get<int>();
  }

  if (j.contains("schedule")) {
    const json& s = j["schedule"];
    check_keys(s, {"code_length", "base_profile", "fixed_profiles"}, "schedule");
    if (s.contains("code_length")) c.schedule.code_length_override = s["code_length"].get<int>();
    if (s.contains("base_profile")) {
      const std::string k = s["base_profile"].get<std::string>();
      if (k == "random") c.schedule.base_kind = BaseProfileKind::Random;
      else if (k == "directional") c.schedule.base_kind = BaseProfileKind::Directional;
      else throw std::invalid_argument("config: base_profile must be 'random' or 'directional'");
    }
    if (s.contains("fixed_profiles")) c.schedule.fixed_profiles = s["fixed_profiles"].get<bool>();
  }

  if (j.contains("estimator")) {
    const std::string e = j["estimator"].get<std::string>();
    if (e == "los") c.estimator = EstimatorKind::Los;
    else if (e == "nlos_ml") c.estimator = EstimatorKind::NlosMl;
    else if (e == "nlos_lc") c.estimator = EstimatorKind::NlosLc;
    else throw std::invalid_argument("config: estimator must be 'los', 'nlos_ml' or 'nlos_lc'");
  }

  if (j.contains("detector")) {
    const json& d = j["detector"];
    check_keys(d, {"threshold", "target_pd", "calibration_trials", "calibration_power_dbm",
                   "variant"},
               "detector");
    if (d.contains("threshold") && !d["threshold"].is_null())
      c.detector.threshold = d["threshold"].get<double>();
    if (d.contains("target_pd")) c.detector.target_pd = d["target_pd"].get<double>();
    if (d.contains("calibration_trials")) c.detector.calibration_trials = d["calibration_trials"].get<int>();
    if (d.contains("calibration_power_dbm"))
      c.detector.calibration_power_dbm = d["calibration_power_dbm"].get<double>();
    if (d.contains("variant")) {
      const std::string v = d["variant"].get<std::string>();
      if (v == "ml") c.detector.variant = DetectorVariant::Ml;
      else if (v == "lc") c.detector.variant = DetectorVariant::Lc;
      else throw std::invalid_argument("config: detector variant must be 'ml' or 'lc'");
    }
  }

  if (j.contains("rician")) {
    const json& r = j["rician"];
    check_keys(r, {"kappa_los", "kappa_bs_ris", "kappa_ris_ue", "kappa_sweep"}, "rician");
    if (r.contains("kappa_los")) c.rician.kappa_los = r["kappa_los"].get<double>();
    if (r.contains("kappa_bs_ris")) c.rician.kappa_bs_ris = r["kappa_bs_ris"].get<double>();
    if (r.contains("kappa_ris_ue")) c.rician.kappa_ris_ue = r["kappa_ris_ue"].get<double>();
    if (r.contains("kappa_sweep")) {
      c.rician.kappa_sweep.clear();
      for (const json& k : r["kappa_sweep"]) c.rician.kappa_sweep.push_back(k.get<double>());
    }
  }

  if (j.contains("cfo_sweep_hz")) {
    c.cfo_sweep_hz.clear();
    for (const json& v : j["cfo_sweep_hz"]) c.cfo_sweep_hz.push_back(v.get<double>());
  }
  if (j.contains("position_refinement")) c.position_refinement = j["position_refinement"].get<bool>();

  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace risloc
