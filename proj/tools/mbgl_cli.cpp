// mbgl: command-line front end for the multivariate basis graphical lasso.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mbgl/mbgl.hpp"

namespace fs = std::filesystem;
using namespace mbgl;

namespace {

enum ExitCode { kOk = 0, kIoFailure = 1, kValidationFailure = 2, kNumericalFailure = 3 };

std::vector<double> parse_grid(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    out.push_back(io::parse_double(item));
  }
  require(!out.empty(), ErrorCode::InvalidArgument, std::string(what) + " grid is empty");
  return out;
}

std::vector<std::string> read_names(const std::string& path) {
  std::vector<std::string> names;
  if (path.empty()) return names;
  for (const auto& line : io::read_lines(path))
    if (!line.empty()) names.push_back(line);
  return names;
}

Dataset load_dataset(const std::string& path, const std::string& names_path) {
  return io::to_dataset(io::read_matrix_file(path), {}, read_names(names_path));
}

/// Data as seen by the model: standardized with the basis directory's fields
/// when it carries them.
Dataset prepared_data(const Dataset& raw, const io::BasisArchive& basis) {
  return basis.standardization ? apply_standardization(raw, *basis.standardization) : raw;
}

struct NoiseChoice {
  std::string file;
  bool estimate = false;
};

struct ResolvedNoise {
  NoiseModel noise;
  std::string source;
  std::vector<NoiseFit> fits;
};

ResolvedNoise resolve_noise(const NoiseChoice& choice, const Dataset& data, const BasisMatrix& basis) {
  if (!choice.file.empty()) {
    const Matrix tau = io::to_matrix(io::read_matrix_file(choice.file));
    require(tau.cols() == 1 && tau.rows() == idx(data.n_vars()), ErrorCode::DimensionMismatch,
            "noise file must be p x 1");
    return {NoiseModel(tau.col(0)), "file", {}};
  }
  auto est = estimate_all_noise(data, basis);
  return {est.noise, "estimated", std::move(est.fits)};
}

std::string noise_table(const ResolvedNoise& noise, const std::vector<std::string>& names) {
  std::string out = "variable,tau_sq,a,b,objective,boundary_hit\n";
  for (std::size_t v = 0; v < noise.fits.size(); ++v) {
    const auto& f = noise.fits[v];
    out += names[v] + "," + io::format_double(f.params.tau_sq) + "," + io::format_double(f.params.a) +
           "," + io::format_double(f.params.b) + "," + io::format_double(f.objective) + "," +
           (f.boundary_hit ? "1" : "0") + "\n";
  }
  return out;
}

std::string fit_report_text(const FitReport& report) {
  std::string out;
  out += std::string("mode=") + (report.mle_mode ? "mle" : "penalized") + "\n";
  out += "lambda=" + io::format_double(report.penalty.lambda) + "\n";
  out += "rho=" + io::format_double(report.penalty.rho) + "\n";
  out += "dc_tolerance=" + io::format_double(report.penalty.dc_tolerance) + "\n";
  out += "dc_iterations=" + std::to_string(report.n_dc_iterations) + "\n";
  out += std::string("converged=") + (report.converged ? "true" : "false") + "\n";
  out += "iteration,objective,relative_change\n";
  for (std::size_t k = 0; k < report.objective_trace.size(); ++k) {
    out += std::to_string(k) + "," + io::format_double(report.objective_trace[k]) + ",";
    out += k == 0 ? std::string("NA") : io::format_double(report.relative_change_trace[k - 1]);
    out += "\n";
  }
  for (const auto& note : report.notes) out += "note=" + note + "\n";
  out += "wall_time_seconds=" + io::format_double(report.wall_time_seconds) + "\n";
  return out;
}

/// Variable by name or 1-based index.
std::size_t resolve_variable(const std::string& token, const FittedModel& model) {
  const auto& names = model.variable_names;
  for (std::size_t v = 0; v < names.size(); ++v)
    if (names[v] == token) return v;
  std::size_t pos = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == token.size() && value >= 1 && value <= model.p(), ErrorCode::IndexOutOfRange,
          "unknown variable '" + token + "'");
  return value - 1;
}

std::size_t parse_index(const std::string& token, const char* what) {
  std::size_t pos = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == token.size() && !token.empty(), ErrorCode::InvalidArgument,
          std::string("bad ") + what + " '" + token + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, sep);) out.push_back(item);
  return out;
}

// --- subcommands -----------------------------------------------------------

struct BasisArgs {
  std::string data, names, out;
  std::size_t levels = 0;
  bool standardize = false;
};

int run_basis(const BasisArgs& a) {
  Dataset data = load_dataset(a.data, a.names);
  io::BasisArchive archive;
  if (a.standardize) {
    auto [std_data, fields] = standardize(data);
    data = std::move(std_data);
    archive.standardization = std::move(fields);
  }
  archive.basis = build_pooled_eof_basis(data, a.levels);
  io::save_basis_dir(a.out, archive);
  std::cout << "basis: n=" << archive.basis.n_locations() << " L=" << archive.basis.n_levels()
            << " variance_fraction=" << io::format_double(archive.basis.variance_fraction.back())
            << "\n";
  return kOk;
}

struct FitArgs {
  std::string data, names, basis, out;
  NoiseChoice noise;
  double lambda = 0.0, rho = 0.0, tol = 0.05, inner_tol = 1e-6;
  std::size_t max_iter = 100;
  bool mle = false, verbose = false;
};

int run_fit(const FitArgs& a) {
  const auto basis = io::load_basis_dir(a.basis);
  const Dataset data = prepared_data(load_dataset(a.data, a.names), basis);
  const auto noise = resolve_noise(a.noise, data, basis.basis);
  const SuffStats stats = compute_suffstats(data, basis.basis, noise.noise);

  std::ostream* progress = a.verbose ? &std::cerr : nullptr;
  FitResult fit;
  if (a.mle) {
    fit = mle_fit(stats, noise.noise, a.tol, a.max_iter, std::nullopt, progress);
  } else {
    fit = dc_fit(stats, noise.noise, PenaltyConfig{a.lambda, a.rho, a.tol, a.inner_tol, a.max_iter},
                 std::nullopt, progress);
  }

  io::ModelArchive archive;
  archive.model = FittedModel{basis.basis, fit.q, noise.noise, basis.standardization,
                              data.variable_names()};
  auto& m = archive.manifest;
  m.set("tool_version", io::kToolVersion);
  m.set("mode", a.mle ? "mle" : "penalized");
  m.set("lambda", io::format_double(fit.report.penalty.lambda));
  m.set("rho", io::format_double(fit.report.penalty.rho));
  m.set("dc_tolerance", io::format_double(fit.report.penalty.dc_tolerance));
  m.set("dc_iterations", std::to_string(fit.report.n_dc_iterations));
  m.set("converged", fit.report.converged ? "true" : "false");
  m.set("noise", noise.source);
  m.set("created", io::utc_timestamp());
  io::save_model_archive(a.out, archive);
  io::write_text(fs::path(a.out) / "fit_report.txt", fit_report_text(fit.report));
  if (!noise.fits.empty())
    io::write_text(fs::path(a.out) / "noise_fit.csv", noise_table(noise, data.variable_names()));

  std::cout << "fit: dc_iterations=" << fit.report.n_dc_iterations
            << " converged=" << (fit.report.converged ? "true" : "false")
            << " objective=" << io::format_double(fit.report.objective_trace.back()) << "\n";
  return kOk;
}

struct CvArgs {
  std::string data, names, basis, out, lambda_grid, rho_grid = "0";
  NoiseChoice noise;
  std::size_t folds = 5, max_iter = 100;
  std::uint64_t seed = 1;
  double tol = 0.05, inner_tol = 1e-6;
};

int run_cv(const CvArgs& a) {
  const auto basis = io::load_basis_dir(a.basis);
  const Dataset data = prepared_data(load_dataset(a.data, a.names), basis);
  const auto noise = resolve_noise(a.noise, data, basis.basis);
  const auto plan = make_cv_plan(data.n_realizations(), a.folds, parse_grid(a.lambda_grid, "lambda"),
                                 parse_grid(a.rho_grid, "rho"), a.seed);
  CvOptions options;
  options.base = PenaltyConfig{0.0, 0.0, a.tol, a.inner_tol, a.max_iter};
  const CvResult result = cross_validate(data, basis.basis, noise.noise, plan, options);

  std::string table = "stage,lambda,rho,mean_score";
  for (std::size_t f = 0; f < plan.k; ++f) table += ",fold" + std::to_string(f + 1);
  table += ",status\n";
  for (const auto& row : result.table) {
    table += std::to_string(row.stage) + "," + io::format_double(row.lambda) + "," +
             io::format_double(row.rho) + "," + (row.failed ? "NA" : io::format_double(row.mean_score));
    for (std::size_t f = 0; f < plan.k; ++f)
      table += "," + (f < row.fold_scores.size() ? io::format_double(row.fold_scores[f]) : "NA");
    table += "," + (row.failed ? "failed: " + row.message : std::string("ok")) + "\n";
  }
  const std::string selected = "lambda=" + io::format_double(result.selected.lambda) + "\nrho=" +
                               io::format_double(result.selected.rho) + "\nscore=" +
                               io::format_double(result.selected_score) + "\nfolds=" +
                               std::to_string(plan.k) + "\nseed=" + std::to_string(a.seed) + "\n";
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + a.out + ": " + ec.message());
  io::write_text(fs::path(a.out) / "cv_scores.csv", table);
  io::write_text(fs::path(a.out) / "selected.txt", selected);
  std::cout << "cv: lambda=" << io::format_double(result.selected.lambda)
            << " rho=" << io::format_double(result.selected.rho) << "\n";
  return kOk;
}

struct SimulateArgs {
  std::string model, out;
  long long realizations = 0;
  std::uint64_t seed = 1;
  bool no_noise = false, destandardize = false;
};

int run_simulate(const SimulateArgs& a) {
  require(a.realizations >= 1, ErrorCode::InvalidArgument, "--realizations must be at least 1");
  const auto archive = io::load_model_archive(a.model);
  const Dataset sim = simulate(archive.model, std::size_t(a.realizations), a.seed, !a.no_noise,
                               a.destandardize);
  io::write_matrix_file(a.out, io::from_dataset(sim));
  std::cout << "simulate: wrote " << sim.n_vars() << " x " << sim.n_locations() << " x "
            << sim.n_realizations() << "\n";
  return kOk;
}

struct DiagnoseArgs {
  std::string model, report, out;
  double zero_tol = kDefaultZeroTol;
  bool include_noise = false;
};

int run_diagnose(const DiagnoseArgs& a) {
  const auto archive = io::load_model_archive(a.model);
  const FittedModel& model = archive.model;
  const auto& q = model.q;
  std::vector<std::string> names = model.variable_names;
  if (names.empty())
    for (std::size_t v = 0; v < model.p(); ++v) names.push_back("var" + std::to_string(v + 1));

  const auto colon = a.report.find(':');
  const std::string kind = a.report.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : a.report.substr(colon + 1);
  const std::string tol_line = "# zero_tol=" + io::format_double(a.zero_tol) + "\n";

  if (kind == "marginal-precisions") {
    const Matrix mp = marginal_precisions(q);
    std::string out = "level";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (Eigen::Index l = 0; l < mp.rows(); ++l) {
      out += std::to_string(l + 1);
      for (Eigen::Index v = 0; v < mp.cols(); ++v) out += "," + io::format_double(mp(l, v));
      out += "\n";
    }
    io::write_text(a.out, out);
  } else if (kind == "edges") {
    const auto counts = edge_counts_by_level(q, a.zero_tol);
    std::string out = tol_line + "level,edges\n";
    for (std::size_t l = 0; l < counts.size(); ++l)
      out += std::to_string(l + 1) + "," + std::to_string(counts[l]) + "\n";
    io::write_text(a.out, out);
  } else if (kind == "neighbors") {
    const auto var = resolve_variable(arg, model);
    const BoolArray trace = neighbor_trace(q, var, a.zero_tol);
    std::string out = tol_line + "level";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (Eigen::Index l = 0; l < trace.rows(); ++l) {
      out += std::to_string(l + 1);
      for (Eigen::Index v = 0; v < trace.cols(); ++v) out += trace(l, v) ? ",1" : ",0";
      out += "\n";
    }
    io::write_text(a.out, out);
  } else if (kind == "independence") {
    const auto level = independence_level(q, a.zero_tol);
    std::string out = tol_line + "variable,independence_level\n";
    for (std::size_t v = 0; v < level.size(); ++v)
      out += names[v] + "," + std::to_string(level[v]) + "\n";
    io::write_text(a.out, out);
  } else if (kind == "local-sd") {
    const ModelAnalysis analysis(model);
    const Vector sd = analysis.local_sd_field(resolve_variable(arg, model), a.include_noise);
    io::write_matrix_file(a.out, io::from_matrix(sd));
  } else if (kind == "corr-map") {
    const auto parts = split(arg, ',');
    require(parts.size() == 3, ErrorCode::InvalidArgument,
            "corr-map expects <var_i>,<var_j>,<anchor>");
    const ModelAnalysis analysis(model);
    const Vector map =
        analysis.correlation_map(resolve_variable(parts[0], model), resolve_variable(parts[1], model),
                                 parse_index(parts[2], "anchor location"), a.include_noise);
    io::write_matrix_file(a.out, io::from_matrix(map));
  } else {
    fail(ErrorCode::InvalidArgument, "unknown report '" + a.report + "'");
  }
  std::cout << "diagnose: wrote " << a.report << " to " << a.out << "\n";
  return kOk;
}

struct ConvertArgs {
  std::string in, out, shape;
};

int run_convert(const ConvertArgs& a) {
  const auto ext = fs::path(a.in).extension().string();
  if (ext == ".csv") {
    const Matrix m = io::read_csv(a.in);
    io::NdArray array = io::from_matrix(m);
    if (!a.shape.empty()) {
      std::vector<std::uint64_t> dims;
      std::uint64_t total = 1;
      for (const auto& d : split(a.shape, ',')) {
        dims.push_back(parse_index(d, "dimension"));
        total *= dims.back();
      }
      require(dims.size() == 2 || dims.size() == 3, ErrorCode::InvalidArgument,
              "--shape takes 2 or 3 dimensions");
      require(total == array.element_count(), ErrorCode::DimensionMismatch,
              "--shape does not match the number of CSV values");
      array.dims = dims;
    }
    io::write_matrix_file(a.out, array);
  } else {
    io::NdArray array = io::read_matrix_file(a.in);
    // 3-D arrays flatten their trailing dimensions into columns.
    std::uint64_t cols = 1;
    for (std::size_t k = 1; k < array.dims.size(); ++k) cols *= array.dims[k];
    io::write_text(a.out, io::to_csv(Eigen::Map<const Matrix>(array.data.data(), idx(array.dims[0]),
                                                              idx(cols))));
  }
  return kOk;
}

void add_noise_options(CLI::App* cmd, NoiseChoice& choice) {
  auto* file = cmd->add_option("--noise", choice.file, "p x 1 matrix file of error variances");
  auto* est = cmd->add_flag("--estimate-noise", choice.estimate,
                            "estimate error variances from the data (default)");
  file->excludes(est);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate basis graphical lasso"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: MBGL_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);

  BasisArgs basis;
  auto* basis_cmd = app.add_subcommand("basis", "standardize data and build pooled EOFs");
  basis_cmd->add_option("--data", basis.data, "p x n x m matrix file")->required();
  basis_cmd->add_option("--names", basis.names, "variable names, one per line");
  basis_cmd->add_option("--levels", basis.levels, "number of basis functions")->required();
  basis_cmd->add_flag("--standardize", basis.standardize, "remove pixelwise mean and sd first");
  basis_cmd->add_option("--out", basis.out, "output directory")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit the block precision model");
  fit_cmd->add_option("--data", fit.data, "p x n x m matrix file")->required();
  fit_cmd->add_option("--names", fit.names, "variable names, one per line");
  fit_cmd->add_option("--basis", fit.basis, "basis directory")->required();
  fit_cmd->add_option("--lambda", fit.lambda, "sparsity penalty");
  fit_cmd->add_option("--rho", fit.rho, "fusion penalty");
  fit_cmd->add_flag("--mle", fit.mle, "unpenalized maximum likelihood");
  fit_cmd->add_option("--tol", fit.tol, "relative change stopping threshold");
  fit_cmd->add_option("--inner-tol", fit.inner_tol, "inner solver tolerance");
  fit_cmd->add_option("--max-iter", fit.max_iter, "DC iteration cap");
  fit_cmd->add_flag("--verbose", fit.verbose, "print the objective trace to stderr");
  add_noise_options(fit_cmd, fit.noise);
  fit_cmd->add_option("--out", fit.out, "model directory")->required();

  CvArgs cv;
  auto* cv_cmd = app.add_subcommand("cv", "select penalties by k-fold cross-validation");
  cv_cmd->add_option("--data", cv.data, "p x n x m matrix file")->required();
  cv_cmd->add_option("--names", cv.names, "variable names, one per line");
  cv_cmd->add_option("--basis", cv.basis, "basis directory")->required();
  cv_cmd->add_option("--lambda-grid", cv.lambda_grid, "comma-separated lambdas")->required();
  cv_cmd->add_option("--rho-grid", cv.rho_grid, "comma-separated rhos");
  cv_cmd->add_option("--folds", cv.folds, "number of folds");
  cv_cmd->add_option("--seed", cv.seed, "fold shuffle seed");
  cv_cmd->add_option("--tol", cv.tol, "relative change stopping threshold");
  cv_cmd->add_option("--inner-tol", cv.inner_tol, "inner solver tolerance");
  cv_cmd->add_option("--max-iter", cv.max_iter, "DC iteration cap");
  add_noise_options(cv_cmd, cv.noise);
  cv_cmd->add_option("--out", cv.out, "output directory")->required();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw realizations from a fitted model");
  sim_cmd->add_option("--model", sim.model, "model directory")->required();
  sim_cmd->add_option("--realizations", sim.realizations, "number of realizations")->required();
  sim_cmd->add_option("--seed", sim.seed, "random seed");
  sim_cmd->add_flag("--no-noise", sim.no_noise, "omit the error term");
  sim_cmd->add_flag("--destandardize", sim.destandardize, "map back to data units");
  sim_cmd->add_option("--out", sim.out, "output matrix file")->required();

  DiagnoseArgs diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "summaries of a fitted model");
  diag_cmd->add_option("--model", diag.model, "model directory")->required();
  diag_cmd->add_option("--report", diag.report,
                       "marginal-precisions | edges | neighbors:<var> | independence | "
                       "local-sd:<var> | corr-map:<var_i>,<var_j>,<anchor>")
      ->required();
  diag_cmd->add_option("--zero-tol", diag.zero_tol, "edge threshold");
  diag_cmd->add_flag("--include-noise", diag.include_noise, "add error variance to sds");
  diag_cmd->add_option("--out", diag.out, "output file")->required();

  ConvertArgs conv;
  auto* conv_cmd = app.add_subcommand("convert", "convert between CSV and matrix files");
  conv_cmd->add_option("--in", conv.in, "input (.csv or matrix file)")->required();
  conv_cmd->add_option("--out", conv.out, "output")->required();
  conv_cmd->add_option("--shape", conv.shape, "dims for CSV input, e.g. p,n,m");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidationFailure;
  }
  set_num_threads(threads);

  try {
    if (*basis_cmd) return run_basis(basis);
    if (*fit_cmd) return run_fit(fit);
    if (*cv_cmd) return run_cv(cv);
    if (*sim_cmd) return run_simulate(sim);
    if (*diag_cmd) return run_diagnose(diag);
    if (*conv_cmd) return run_convert(conv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (category(e.code())) {
      case ErrorCategory::Io: return kIoFailure;
      case ErrorCategory::Validation: return kValidationFailure;
      case ErrorCategory::Numerical: return kNumericalFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kOk;
}
