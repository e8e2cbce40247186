// qstretch - multi-shell stretched-exponential fitting and q-space
// scalar measures (RTOP, QMSD, QMFD) with built-in numerical checks.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qst/analysis.hpp"
#include "qst/errors.hpp"
#include "qst/exports.hpp"
#include "qst/fit_store.hpp"
#include "qst/fitting.hpp"
#include "qst/gradient.hpp"
#include "qst/nifti.hpp"
#include "qst/phantom.hpp"
#include "qst/qmaps.hpp"
#include "qst/sh.hpp"
#include "qst/verify.hpp"
#include "qst/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string dwi, bvals, bvecs, mask_path, config_path;
  double tau = 0.0;
  double b_tolerance = qst::kDefaultBTolerance;
  double angular_tol = qst::kDefaultAngularTolDeg;
  std::vector<double> shells;  // fit subset by b-value; empty = all
  int threads = 1;
  qst::FitOptions fit;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw qst::DataError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw qst::DataError("config " + path + ": " + e.what());
  }
  return j;
}

// Config file supplies defaults; explicitly passed flags win.
void apply_config(const json& cfg, const CLI::App& sub, CommonOpts& opt) {
  auto absent = [&](const std::string& flag) {
    const CLI::Option* o = sub.get_option_no_throw(flag);
    return o == nullptr || o->count() == 0;
  };
  if (cfg.contains("tau") && absent("--tau")) opt.tau = cfg.at("tau").get<double>();
  if (cfg.contains("shells") && absent("--shells"))
    opt.shells = cfg.at("shells").get<std::vector<double>>();
  if (cfg.contains("threads") && absent("--threads")) opt.threads = cfg.at("threads").get<int>();
  if (cfg.contains("b_tolerance") && absent("--b-tolerance"))
    opt.b_tolerance = cfg.at("b_tolerance").get<double>();
  if (cfg.contains("angular_tol") && absent("--angular-tol"))
    opt.angular_tol = cfg.at("angular_tol").get<double>();
  if (cfg.contains("fit")) {
    const auto& f = cfg.at("fit");
    opt.fit.d_min = f.value("d_min", opt.fit.d_min);
    opt.fit.d_max = f.value("d_max", opt.fit.d_max);
    opt.fit.alpha_min = f.value("alpha_min", opt.fit.alpha_min);
    opt.fit.alpha_max = f.value("alpha_max", opt.fit.alpha_max);
    opt.fit.gtol = f.value("gtol", opt.fit.gtol);
    opt.fit.xtol = f.value("xtol", opt.fit.xtol);
    opt.fit.max_iter = f.value("max_iter", opt.fit.max_iter);
  }
}

void add_common_flags(CLI::App* sub, CommonOpts& opt, bool need_tables) {
  sub->add_option("--dwi", opt.dwi, "4-D acquisition (.nii/.nii.gz)");
  sub->add_option("--bvals", opt.bvals, "b-values text file");
  sub->add_option("--bvecs", opt.bvecs, "gradient directions text file");
  sub->add_option("--tau", opt.tau, "effective diffusion time [s]");
  sub->add_option("--mask", opt.mask_path, "mask volume (nonzero = inside)");
  sub->add_option("--shells", opt.shells, "fit shell subset by b-value")->delimiter(',');
  sub->add_option("--b-tolerance", opt.b_tolerance, "shell clustering tolerance [s/mm^2]");
  sub->add_option("--angular-tol", opt.angular_tol, "direction matching tolerance [deg]");
  sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--config", opt.config_path, "JSON config; flags override its values");
  sub->add_option("--gtol", opt.fit.gtol, "projected-gradient tolerance");
  sub->add_option("--xtol", opt.fit.xtol, "relative step tolerance");
  sub->add_option("--max-iter", opt.fit.max_iter, "iteration cap per direction");
  if (need_tables) {
    // tau may come from the config file instead
    sub->get_option("--dwi")->required();
    sub->get_option("--bvals")->required();
    sub->get_option("--bvecs")->required();
  }
}

struct Acquisition {
  qst::GradientScheme scheme;
  qst::ShellGrouping grouping;
  qst::DirectionBundleSet bundles;
  qst::Volume4D dwi;
};

Acquisition load_acquisition(const CommonOpts& opt) {
  if (opt.tau <= 0.0)
    throw std::invalid_argument("--tau is required (flag or config) and must be positive");
  Acquisition acq;
  acq.scheme = qst::read_gradient_scheme(opt.bvals, opt.bvecs, opt.tau);
  for (const auto& w : acq.scheme.warnings) std::cerr << "warning: " << w << "\n";
  acq.grouping = qst::group_shells(acq.scheme, opt.b_tolerance);
  if (acq.grouping.n_shells() < 1)
    throw qst::DataError("acquisition has no diffusion-weighted shell");
  acq.bundles = qst::match_directions(acq.scheme, acq.grouping, opt.angular_tol);
  if (acq.bundles.n_complete == 0)
    throw qst::DataError(
        "no direction bundle is complete across shells; this acquisition cannot "
        "support per-direction multi-shell fitting");
  acq.dwi = qst::read_nifti(opt.dwi);
  if (acq.dwi.nv() != acq.scheme.n_measurements())
    throw qst::DataError("acquisition has " + std::to_string(acq.dwi.nv()) +
                         " volumes but the gradient table lists " +
                         std::to_string(acq.scheme.n_measurements()));
  return acq;
}

qst::Mask load_mask(const std::string& path, const std::array<int64_t, 3>& dims) {
  if (path.empty()) return {};
  const qst::Volume4D vol = qst::read_nifti(path);
  if (vol.dims[0] != dims[0] || vol.dims[1] != dims[1] || vol.dims[2] != dims[2])
    throw qst::DataError("mask dims do not match the data");
  return qst::Mask::from_volume(vol);
}

std::vector<int> shell_subset_from_bvals(const qst::ShellGrouping& grouping,
                                         const std::vector<double>& shells,
                                         double b_tolerance) {
  std::vector<int> subset;
  for (double b : shells) {
    const int s = grouping.find_shell(b, b_tolerance);
    if (s < 0) throw qst::DataError("no shell at b = " + qst::format_double(b));
    subset.push_back(s);
  }
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  return subset;
}

void write_sidecar(const fs::path& path, const json& extra) {
  json j = extra;
  j["tool"] = "qstretch";
  j["version"] = qst::kVersion;
  if (!j.contains("config_hash")) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(qst::fnv1a64(j.dump())));
    j["config_hash"] = hash;
  }
  std::ofstream out(path);
  if (!out) throw qst::DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- phantom

int cmd_phantom(const std::string& spec_path, const std::string& out_dir, int threads,
                std::optional<uint64_t> seed_override) {
  std::ifstream in(spec_path);
  if (!in) throw qst::DataError("cannot open phantom spec " + spec_path);
  json spec_json;
  try {
    in >> spec_json;
  } catch (const json::exception& e) {
    throw qst::DataError("phantom spec: " + std::string(e.what()));
  }
  if (seed_override) spec_json["seed"] = *seed_override;
  const qst::PhantomSpec spec = qst::phantom_spec_from_json(spec_json);
  std::cerr << "generating " << spec.dims[0] << "x" << spec.dims[1] << "x" << spec.dims[2]
            << " phantom, " << spec.regions.size() << " regions\n";
  const qst::Phantom ph = qst::generate_phantom(spec, threads);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  qst::write_nifti(ph.dwi, (dir / "dwi.nii").string(), qst::NiftiDatatype::float64);

  std::ofstream bvals(dir / "bvals"), bvecs(dir / "bvecs");
  for (int i = 0; i < ph.scheme.n_measurements(); ++i)
    bvals << (i ? " " : "") << qst::format_double(ph.scheme.bvals[i]);
  bvals << "\n";
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < ph.scheme.n_measurements(); ++i)
      bvecs << (i ? " " : "") << qst::format_double(ph.scheme.directions[i][r]);
    bvecs << "\n";
  }

  qst::Volume4D mask = qst::Volume4D::create(spec.dims[0], spec.dims[1], spec.dims[2], 1, 1.0);
  mask.set_voxel_size(spec.voxel_size[0], spec.voxel_size[1], spec.voxel_size[2]);
  qst::write_nifti(mask, (dir / "mask.nii").string());
  qst::write_nifti(ph.truth.alpha, (dir / "truth_alpha.nii").string());
  qst::write_nifti(ph.truth.tensor6, (dir / "truth_tensor.nii").string(),
                   qst::NiftiDatatype::float64);
  qst::write_nifti(ph.truth.m0, (dir / "truth_rtop.nii").string(), qst::NiftiDatatype::float64);
  qst::write_nifti(ph.truth.m2, (dir / "truth_qmsd.nii").string(), qst::NiftiDatatype::float64);
  qst::write_nifti(ph.truth.m4, (dir / "truth_qmfd.nii").string(), qst::NiftiDatatype::float64);

  json sidecar;
  sidecar["subcommand"] = "phantom";
  sidecar["spec"] = spec_json;
  write_sidecar(dir / "phantom.json", sidecar);
  std::cerr << "wrote " << (dir / "dwi.nii").string() << " (" << ph.scheme.n_measurements()
            << " measurements)\n";
  return 0;
}

// -------------------------------------------------------------------- fit

int cmd_fit(const CommonOpts& opt, const std::string& out_path) {
  const Acquisition acq = load_acquisition(opt);
  const qst::Mask mask = load_mask(opt.mask_path, {acq.dwi.dims[0], acq.dwi.dims[1], acq.dwi.dims[2]});
  const std::vector<int> subset =
      opt.shells.empty() ? std::vector<int>{}
                         : shell_subset_from_bvals(acq.grouping, opt.shells, opt.b_tolerance);

  std::cerr << "fitting " << acq.bundles.n_complete << " direction bundles over "
            << (subset.empty() ? acq.grouping.n_shells() : static_cast<int>(subset.size()))
            << " shells\n";
  const qst::FitVolume fit = qst::fit_stretched_volume(acq.dwi, acq.scheme, acq.grouping,
                                                       acq.bundles, subset, opt.fit, mask,
                                                       opt.threads);
  qst::write_fit_volume(fit, out_path);

  json sidecar;
  sidecar["subcommand"] = "fit";
  sidecar["tau"] = acq.scheme.tau;
  sidecar["fit_shells"] = fit.shell_bvals;
  sidecar["n_bundles"] = fit.n_bundles();
  sidecar["inputs"] = {{"dwi", opt.dwi}, {"bvals", opt.bvals}, {"bvecs", opt.bvecs}};
  write_sidecar(out_path + ".json", sidecar);
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

// --------------------------------------------------------------- measures

int cmd_measures(const CommonOpts& opt, const std::string& fit_path,
                 const std::string& out_dir, double shell_b, const std::string& estimator,
                 const std::string& source, int resample, int sh_order, double sh_lambda,
                 const std::string& regions_path, const std::string& pgm_axis,
                 int64_t pgm_index) {
  qst::MapConfig cfg;
  cfg.shell_b = shell_b;
  cfg.resample_dirs = resample;
  cfg.sh_order = sh_order;
  cfg.sh_lambda = sh_lambda;
  if (estimator == "direct") {
    cfg.method = qst::Estimator::direct;
  } else if (estimator == "expansion") {
    cfg.method = qst::Estimator::expansion;
  } else if (estimator == "gaussian") {
    cfg.method = qst::Estimator::direct;
    cfg.source = qst::ESource::measured;
    cfg.unit_alpha = true;
  } else {
    throw qst::DataError("unknown estimator '" + estimator +
                         "' (expected direct, expansion or gaussian)");
  }
  if (source == "measured")
    cfg.source = qst::ESource::measured;
  else if (source == "fitted" && estimator != "gaussian")
    cfg.source = qst::ESource::fitted;
  else if (source != "" && source != "fitted")
    throw qst::DataError("unknown E source '" + source + "'");

  const bool have_tables = !opt.dwi.empty();
  if (cfg.source == qst::ESource::measured && !have_tables)
    throw qst::DataError("measured mode needs --dwi/--bvals/--bvecs/--tau");
  if (fit_path.empty() && !have_tables)
    throw qst::DataError("measures needs either --fit or --dwi/--bvals/--bvecs/--tau");

  // Assemble fit + acquisition context. Without tables, a synthetic
  // acquisition is reconstructed from the fit container (fitted mode).
  qst::FitVolume fit;
  qst::GradientScheme scheme;
  qst::ShellGrouping grouping;
  qst::DirectionBundleSet bundles;
  std::optional<qst::Volume4D> dwi;
  qst::Mask mask;

  if (have_tables) {
    if (opt.bvals.empty() || opt.bvecs.empty() || opt.tau <= 0.0)
      throw qst::DataError("--dwi requires --bvals, --bvecs and --tau");
    Acquisition acq = load_acquisition(opt);
    scheme = std::move(acq.scheme);
    grouping = std::move(acq.grouping);
    bundles = std::move(acq.bundles);
    dwi = std::move(acq.dwi);
    mask = load_mask(opt.mask_path, {dwi->dims[0], dwi->dims[1], dwi->dims[2]});
    if (!fit_path.empty()) {
      fit = qst::read_fit_volume(fit_path);
    } else {
      const std::vector<int> subset =
          opt.shells.empty()
              ? std::vector<int>{}
              : shell_subset_from_bvals(grouping, opt.shells, opt.b_tolerance);
      std::cerr << "fitting " << bundles.n_complete << " bundles\n";
      fit = qst::fit_stretched_volume(*dwi, scheme, grouping, bundles, subset, opt.fit, mask,
                                      opt.threads);
    }
  } else {
    fit = qst::read_fit_volume(fit_path);
    mask = load_mask(opt.mask_path, fit.dims);
    // Synthetic one-measurement-per-(shell, bundle) acquisition.
    std::vector<Eigen::Vector3d> dirs;
    std::vector<double> bvals;
    for (double b : fit.shell_bvals)
      for (const auto& g : fit.bundle_dirs) {
        dirs.push_back(g);
        bvals.push_back(b);
      }
    scheme = qst::make_scheme(std::move(dirs), std::move(bvals), fit.tau);
    grouping = qst::group_shells(scheme, opt.b_tolerance);
    bundles = qst::match_directions(scheme, grouping, opt.angular_tol);
  }

  const qst::QMaps maps = qst::compute_maps(fit, scheme, grouping, bundles,
                                            dwi ? &*dwi : nullptr, cfg, mask, opt.threads);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  qst::write_nifti(maps.rtop, (dir / "rtop.nii").string());
  qst::write_nifti(maps.qmsd, (dir / "qmsd.nii").string());
  qst::write_nifti(maps.qmfd, (dir / "qmfd.nii").string());

  json sidecar = maps.meta;
  sidecar["subcommand"] = "measures";
  write_sidecar(dir / "measures.json", sidecar);

  std::optional<qst::Volume4D> regions;
  if (!regions_path.empty()) regions = qst::read_nifti(regions_path);
  std::string csv = qst::summary_csv_header();
  const std::string label = qst::map_config_label(cfg);
  csv += qst::summary_csv_rows(maps.rtop, "rtop", label, cfg.shell_b,
                               regions ? &*regions : nullptr, mask);
  csv += qst::summary_csv_rows(maps.qmsd, "qmsd", label, cfg.shell_b,
                               regions ? &*regions : nullptr, mask);
  csv += qst::summary_csv_rows(maps.qmfd, "qmfd", label, cfg.shell_b,
                               regions ? &*regions : nullptr, mask);
  std::ofstream csv_out(dir / "summary.csv");
  csv_out << csv;

  if (!pgm_axis.empty()) {
    int axis;
    if (pgm_axis == "x" || pgm_axis == "0") axis = 0;
    else if (pgm_axis == "y" || pgm_axis == "1") axis = 1;
    else if (pgm_axis == "z" || pgm_axis == "2") axis = 2;
    else throw qst::DataError("unknown --pgm-axis '" + pgm_axis + "' (expected x, y or z)");
    qst::write_pgm(qst::export_slice_pgm(maps.rtop, axis, pgm_index), (dir / "rtop.pgm").string());
    qst::write_pgm(qst::export_slice_pgm(maps.qmsd, axis, pgm_index), (dir / "qmsd.pgm").string());
    qst::write_pgm(qst::export_slice_pgm(maps.qmfd, axis, pgm_index), (dir / "qmfd.pgm").string());
  }

  std::cerr << "wrote rtop/qmsd/qmfd maps to " << out_dir << "\n";
  return 0;
}

// ----------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, int n_fields) {
  const auto checks = qst::verify::run_suite(suite, n_fields);
  std::cout << qst::verify::format_table(checks);
  int n_fail = 0;
  for (const auto& c : checks) n_fail += c.pass ? 0 : 1;
  std::cerr << (checks.size() - static_cast<size_t>(n_fail)) << "/" << checks.size()
            << " checks passed\n";
  if (n_fail > 0) throw qst::NumericalError(std::to_string(n_fail) + " checks failed");
  return 0;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze_corr(const std::vector<std::string>& map_paths, const std::string& mask_path,
                     const std::string& out_path, const std::string& pairs_path) {
  if (map_paths.size() < 2) throw qst::DataError("analyze corr needs at least two --maps");
  std::vector<qst::Volume4D> maps;
  for (const auto& p : map_paths) maps.push_back(qst::read_nifti(p));
  const qst::Mask mask =
      load_mask(mask_path, {maps[0].dims[0], maps[0].dims[1], maps[0].dims[2]});

  std::string csv = "map_a,map_b,pearson\n";
  for (size_t i = 0; i < maps.size(); ++i)
    for (size_t j = i + 1; j < maps.size(); ++j)
      csv += fs::path(map_paths[i]).filename().string() + "," +
             fs::path(map_paths[j]).filename().string() + "," +
             qst::format_double(qst::pearson(maps[i], maps[j], mask)) + "\n";
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw qst::DataError("cannot write " + out_path);
    out << csv;
    json sidecar;
    sidecar["subcommand"] = "analyze corr";
    sidecar["maps"] = map_paths;
    write_sidecar(out_path + ".json", sidecar);
  }

  // Per-voxel scatter pairs for external plotting.
  if (!pairs_path.empty()) {
    std::ofstream pairs(pairs_path);
    if (!pairs) throw qst::DataError("cannot write " + pairs_path);
    pairs << "map_a,map_b,value_a,value_b\n";
    for (size_t i = 0; i < maps.size(); ++i)
      for (size_t j = i + 1; j < maps.size(); ++j) {
        const std::string prefix = fs::path(map_paths[i]).filename().string() + "," +
                                   fs::path(map_paths[j]).filename().string() + ",";
        const auto& a = maps[i];
        const auto& b = maps[j];
        for (int64_t z = 0; z < a.nz(); ++z)
          for (int64_t y = 0; y < a.ny(); ++y)
            for (int64_t x = 0; x < a.nx(); ++x) {
              if (!mask(x, y, z)) continue;
              const double va = a.at(x, y, z), vb = b.at(x, y, z);
              if (!std::isfinite(va) || !std::isfinite(vb)) continue;
              pairs << prefix << qst::format_double(va) << ","
                    << qst::format_double(vb) << "\n";
            }
      }
  }
  return 0;
}

int cmd_analyze_sweep(const CommonOpts& opt, const std::vector<double>& bmax_list,
                      double b_eval, const std::string& estimator,
                      const std::string& out_path) {
  const Acquisition acq = load_acquisition(opt);
  const qst::Mask mask =
      load_mask(opt.mask_path, {acq.dwi.dims[0], acq.dwi.dims[1], acq.dwi.dims[2]});
  const qst::Estimator method =
      estimator == "expansion" ? qst::Estimator::expansion : qst::Estimator::direct;
  const qst::SweepResult sweep =
      qst::bmax_sweep(acq.dwi, acq.scheme, acq.grouping, acq.bundles, bmax_list, b_eval,
                      method, opt.fit, mask, opt.threads);
  const std::string csv = qst::sweep_csv(sweep);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!out) throw qst::DataError("cannot write " + out_path);
    out << csv;
    json sidecar;
    sidecar["subcommand"] = "analyze sweep";
    sidecar["b_max"] = sweep.b_max;
    sidecar["b_eval"] = sweep.b_eval;
    sidecar["pairing"] = sweep.pairing;
    sidecar["estimator"] = estimator;
    sidecar["tau"] = opt.tau;
    write_sidecar(out_path + ".json", sidecar);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stretched-exponential q-space measures (RTOP, QMSD, QMFD)"};
  app.set_version_flag("--version", qst::kVersion);
  app.require_subcommand(1);

  // phantom
  auto* sub_phantom = app.add_subcommand("phantom", "generate a synthetic acquisition");
  std::string phantom_spec, phantom_out = "phantom_out";
  int phantom_threads = 1;
  uint64_t phantom_seed = 0;
  sub_phantom->add_option("--spec", phantom_spec, "phantom spec JSON")->required();
  sub_phantom->add_option("-o,--out", phantom_out, "output directory");
  sub_phantom->add_option("--threads", phantom_threads, "worker threads");
  auto* seed_opt = sub_phantom->add_option("--seed", phantom_seed, "override the spec's seed");

  // fit
  auto* sub_fit = app.add_subcommand("fit", "fit the stretched representation per voxel");
  CommonOpts fit_opt;
  std::string fit_out = "fit.qsfit";
  add_common_flags(sub_fit, fit_opt, true);
  sub_fit->add_option("-o,--out", fit_out, "output fit container");

  // measures
  auto* sub_measures = app.add_subcommand("measures", "compute RTOP/QMSD/QMFD maps");
  CommonOpts meas_opt;
  std::string meas_fit, meas_out = "measures_out", meas_estimator = "direct";
  std::string meas_source, meas_regions, meas_pgm_axis;
  double meas_shell = 0.0;
  int meas_resample = 0, meas_sh_order = qst::kDefaultShOrder;
  int64_t meas_pgm_index = 0;
  double meas_sh_lambda = qst::kDefaultShLambda;
  add_common_flags(sub_measures, meas_opt, false);
  sub_measures->add_option("--fit", meas_fit, "fit container from a previous run");
  sub_measures->add_option("--shell", meas_shell, "evaluation shell b-value")->required();
  sub_measures->add_option("--estimator", meas_estimator, "direct | expansion | gaussian");
  sub_measures->add_option("--source", meas_source, "fitted | measured");
  sub_measures->add_option("--resample", meas_resample,
                           "SH-resample shell inputs onto this many uniform directions");
  sub_measures->add_option("--sh-order", meas_sh_order, "SH order for --resample");
  sub_measures->add_option("--sh-lambda", meas_sh_lambda, "SH regularization for --resample");
  sub_measures->add_option("--regions", meas_regions, "label volume for the summary CSV");
  sub_measures->add_option("--pgm-axis", meas_pgm_axis, "also export a PGM slice: x, y or z");
  sub_measures->add_option("--pgm-index", meas_pgm_index, "slice index for --pgm-axis");
  sub_measures->add_option("-o,--out", meas_out, "output directory");

  // verify
  auto* sub_verify = app.add_subcommand("verify", "run numerical cross-checks");
  std::string verify_suite = "all";
  int verify_fields = 20;
  sub_verify->add_option("--suite", verify_suite, "gaussian | oracle | consistency | all");
  sub_verify->add_option("--fields", verify_fields, "random fields for the oracle suite");

  // analyze
  auto* sub_analyze = app.add_subcommand("analyze", "map statistics");
  sub_analyze->require_subcommand(1);
  auto* sub_corr = sub_analyze->add_subcommand("corr", "Pearson correlation between maps");
  std::vector<std::string> corr_maps;
  std::string corr_mask, corr_out, corr_pairs;
  sub_corr->add_option("--maps", corr_maps, "scalar maps (repeat or comma-separate)")
      ->delimiter(',')
      ->required();
  sub_corr->add_option("--mask", corr_mask, "mask volume");
  sub_corr->add_option("-o,--out", corr_out, "output CSV (default stdout)");
  sub_corr->add_option("--dump-pairs", corr_pairs, "write per-voxel scatter pairs to this CSV");

  auto* sub_sweep = sub_analyze->add_subcommand("sweep", "stability vs maximal b-value");
  CommonOpts sweep_opt;
  std::vector<double> sweep_bmax;
  double sweep_beval = 3000.0;
  std::string sweep_estimator = "direct", sweep_out;
  add_common_flags(sub_sweep, sweep_opt, true);
  sub_sweep->add_option("--bmax", sweep_bmax, "b_max list")->delimiter(',')->required();
  sub_sweep->add_option("--b-eval", sweep_beval, "fixed evaluation shell b-value");
  sub_sweep->add_option("--estimator", sweep_estimator, "direct | expansion");
  sub_sweep->add_option("-o,--out", sweep_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sub_phantom->parsed())
      return cmd_phantom(phantom_spec, phantom_out, phantom_threads,
                         seed_opt->count() ? std::optional<uint64_t>(phantom_seed)
                                           : std::nullopt);
    if (sub_fit->parsed()) {
      apply_config(load_config(fit_opt.config_path), *sub_fit, fit_opt);
      return cmd_fit(fit_opt, fit_out);
    }
    if (sub_measures->parsed()) {
      apply_config(load_config(meas_opt.config_path), *sub_measures, meas_opt);
      return cmd_measures(meas_opt, meas_fit, meas_out, meas_shell, meas_estimator,
                          meas_source, meas_resample, meas_sh_order, meas_sh_lambda,
                          meas_regions, meas_pgm_axis, meas_pgm_index);
    }
    if (sub_verify->parsed()) return cmd_verify(verify_suite, verify_fields);
    if (sub_corr->parsed()) return cmd_analyze_corr(corr_maps, corr_mask, corr_out, corr_pairs);
    if (sub_sweep->parsed()) {
      apply_config(load_config(sweep_opt.config_path), *sub_sweep, sweep_opt);
      return cmd_analyze_sweep(sweep_opt, sweep_bmax, sweep_beval, sweep_estimator, sweep_out);
    }
  } catch (const qst::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const qst::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
