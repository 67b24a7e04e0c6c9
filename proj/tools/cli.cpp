#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hbmv/chain_io.hpp"
#include "hbmv/csv.hpp"
#include "hbmv/design.hpp"
#include "hbmv/diagnostics.hpp"
#include "hbmv/error.hpp"
#include "hbmv/io.hpp"
#include "hbmv/model_spec.hpp"
#include "hbmv/predict.hpp"
#include "hbmv/sampler.hpp"
#include "hbmv/synthetic.hpp"

namespace hbmv::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "hbmv 1.0.0";

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Collects files written by a command so the manifest can list their hashes.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    write_file_atomic(dir_ / name, contents);
    files_[name] = fnv1a(contents);
  }

  json listing() const {
    json j = json::object();
    for (const auto& [name, hash] : files_) j[name] = hash;
    return j;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> files_;
};

struct DataFlags {
  std::string patients;
  std::string teams;
  std::string facilities;
};

struct McmcFlags {
  long iterations = 50000;
  long burnin = 10000;
  long thin = 25;
  int chains = 2;
  std::uint64_t seed = 1234567;
};

struct SpecFlags {
  std::string spec;
  std::string transform;
  bool no_standardize = false;
};

void add_data_flags(CLI::App* cmd, DataFlags& f) {
  cmd->add_option("--data", f.patients, "Patient CSV (patient_id, team_id, facility_id, y_*, x_*)")->required();
  cmd->add_option("--team-data", f.teams, "Team CSV (team_id, facility_id, z_*)");
  cmd->add_option("--facility-data", f.facilities, "Facility CSV (facility_id, w_*)");
}

void add_mcmc_flags(CLI::App* cmd, McmcFlags& f) {
  cmd->add_option("--iterations", f.iterations, "Total sweeps per chain")->capture_default_str();
  cmd->add_option("--burnin", f.burnin, "Sweeps discarded before retention")->capture_default_str();
  cmd->add_option("--thin", f.thin, "Keep every thin-th sweep after burn-in")->capture_default_str();
  cmd->add_option("--chains", f.chains, "Independent chains")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Base RNG seed")->capture_default_str();
}

void add_spec_flags(CLI::App* cmd, SpecFlags& f) {
  cmd->add_option("--transform", f.transform, "Response transform override")
      ->check(CLI::IsMember({"identity", "log"}));
  cmd->add_flag("--no-standardize", f.no_standardize, "Use covariates on their raw scale");
}

DatasetPaths paths_of(const DataFlags& f) {
  DatasetPaths p;
  p.patients = f.patients;
  if (!f.teams.empty()) p.teams = fs::path(f.teams);
  if (!f.facilities.empty()) p.facilities = fs::path(f.facilities);
  return p;
}

json data_hashes(const DataFlags& f) {
  json j;
  j["patients"] = fnv1a(read_text(f.patients));
  if (!f.teams.empty()) j["teams"] = fnv1a(read_text(f.teams));
  if (!f.facilities.empty()) j["facilities"] = fnv1a(read_text(f.facilities));
  return j;
}

McmcConfig config_of(const McmcFlags& f) {
  McmcConfig c;
  c.n_iterations = f.iterations;
  c.n_burnin = f.burnin;
  c.thin = f.thin;
  c.n_chains = f.chains;
  c.seed = f.seed;
  validate_config(c);
  return c;
}

json config_json(const McmcConfig& c) {
  return {{"iterations", c.n_iterations}, {"burnin", c.n_burnin}, {"thin", c.thin},
          {"chains", c.n_chains},         {"seed", c.seed},       {"retained_per_chain", c.retained()}};
}

void apply_overrides(ModelSpec& spec, const SpecFlags& f) {
  if (f.transform == "log") spec.response_transform = ResponseTransform::Log;
  if (f.transform == "identity") spec.response_transform = ResponseTransform::Identity;
  if (f.no_standardize) spec.standardize = false;
}

std::string spec_hash(const ModelSpec& spec, const CovariateNames& names) {
  return fnv1a(spec_to_json(spec, names).dump());
}

struct FitRun {
  DesignStructure design;
  std::vector<ChainSamples> chains;
  FitSummary summary;
};

FitRun fit_model(const PanelDataset& data, const ModelSpec& spec, const McmcConfig& config, double mass) {
  FitRun run{build_design(data, spec), {}, {}};
  run.chains = run_chains(run.design, default_priors(run.design.layout), config);
  run.summary = summarize(run.chains, run.design, mass);
  return run;
}

// Each model adds one block of terms to the previous one.
std::vector<ModelSpec> default_ladder(const CovariateNames& names) {
  std::vector<ModelSpec> ladder;
  ModelSpec m = unconditional_spec(names.responses.size());
  m.name = "unconditional";
  ladder.push_back(m);

  m.name = "patient_predictors";
  for (std::size_t c = 0; c < names.patient.size(); ++c) m.patient_predictors.push_back({c, false, false});
  ladder.push_back(m);

  m.name = "patient_random_slopes";
  for (auto& p : m.patient_predictors) p.random_over_team = p.random_over_facility = true;
  ladder.push_back(m);

  m.name = "team_predictors";
  for (std::size_t c = 0; c < names.team.size(); ++c) m.team_predictors.push_back({c, false});
  ladder.push_back(m);

  m.name = "team_random_slopes";
  for (auto& t : m.team_predictors) t.random_over_facility = true;
  ladder.push_back(m);

  m.name = "facility_predictors";
  for (std::size_t c = 0; c < names.facility.size(); ++c) m.facility_predictors.push_back({c});
  ladder.push_back(m);
  return ladder;
}

bool contains_all(const std::vector<std::string>& big, const std::vector<std::string>& small) {
  const std::set<std::string> b(big.begin(), big.end());
  for (const auto& s : small) {
    if (!b.count(s)) return false;
  }
  return true;
}

void write_error(std::ostream& err, const std::string& name, const std::string& message, int code) {
  err << json{{"error", name}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

int cmd_fit(const DataFlags& data, const SpecFlags& sf, const McmcFlags& mf, double mass, const std::string& out_dir,
            std::ostream& out) {
  const PanelDataset ds = read_dataset(paths_of(data));
  const CovariateNames names = CovariateNames::of(ds);
  ModelSpec spec = sf.spec.empty() ? unconditional_spec(ds.n_outcomes()) : spec_from_json(read_json_file(sf.spec), names);
  apply_overrides(spec, sf);
  const McmcConfig config = config_of(mf);
  const FitRun run = fit_model(ds, spec, config, mass);

  ensure_dir(out_dir);
  Outputs files(out_dir);
  for (const auto& chain : run.chains) {
    const std::string name = "chain_" + std::to_string(chain.chain_index + 1) + ".csv";
    write_chain_csv(files.dir() / name, chain, run.design.layout);
    files.write(name, read_text(files.dir() / name));
  }
  files.write("layout.json", pretty(layout_manifest(run.design.layout, config)));
  files.write("summary.json", pretty(to_json(run.summary)));
  files.write("variance_table.csv", variance_table_csv(run.summary, run.design.layout));
  files.write("icc.csv", icc_table_csv(run.summary));

  json manifest{{"tool", kToolVersion},
                {"command", "fit"},
                {"spec", spec_to_json(spec, names)},
                {"spec_hash", spec_hash(spec, names)},
                {"data", data_hashes(data)},
                {"seed", config.seed},
                {"mcmc", config_json(config)},
                {"mass", mass},
                {"outputs", files.listing()}};
  write_file_atomic(files.dir() / "manifest.json", pretty(manifest));
  out << "fit '" << spec.name << "': " << run.summary.n_draws << " draws, DIC " << run.summary.dic.dic << " -> "
      << out_dir << "\n";
  return 0;
}

int cmd_ladder(const DataFlags& data, const SpecFlags& sf, const std::string& ladder_file, const McmcFlags& mf,
               double mass, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const PanelDataset ds = read_dataset(paths_of(data));
  const CovariateNames names = CovariateNames::of(ds);
  std::vector<ModelSpec> specs;
  const bool user_ladder = !ladder_file.empty();
  if (user_ladder) {
    const json j = read_json_file(ladder_file);
    const json& models = j.is_object() ? j.at("models") : j;
    if (!models.is_array()) throw Error(ErrorCode::InvalidSpec, "ladder file must list model specs");
    for (const auto& m : models) specs.push_back(spec_from_json(m, names));
  } else {
    specs = default_ladder(names);
  }
  if (specs.size() < 2) throw Error(ErrorCode::Usage, "a ladder needs at least two model specs");
  for (auto& s : specs) apply_overrides(s, sf);
  const McmcConfig base = config_of(mf);

  ensure_dir(out_dir);
  Outputs files(out_dir);
  std::vector<ModelRun> runs;
  json models = json::array();
  std::optional<DesignLayout> previous;
  for (std::size_t m = 0; m < specs.size(); ++m) {
    std::ostringstream id;
    id << std::setw(2) << std::setfill('0') << (m + 1) << "_" << specs[m].name;
    ModelRun run;
    run.model_id = id.str();
    json model{{"model_id", run.model_id}, {"spec", spec_to_json(specs[m], names)}};
    for (int r = 0; r < 2; ++r) {
      McmcConfig config = base;
      config.seed = base.seed + static_cast<std::uint64_t>(r);
      const FitRun fit = fit_model(ds, specs[m], config, mass);
      (r == 0 ? run.dic_run1 : run.dic_run2) = fit.summary.dic.dic;
      run.n_params = fit.design.layout.parameter_count();
      const fs::path model_dir = fs::path("models") / run.model_id;
      ensure_dir(files.dir() / model_dir);
      files.write((model_dir / ("run" + std::to_string(r + 1) + "_summary.json")).string(),
                  pretty(to_json(fit.summary)));
      if (r == 0) {
        const auto& layout = fit.design.layout;
        if (user_ladder && previous &&
            !(contains_all(layout.fixed.column_labels, previous->fixed.column_labels) &&
              contains_all(layout.team_effects.labels(), previous->team_effects.labels()) &&
              contains_all(layout.facility_effects.labels(), previous->facility_effects.labels()))) {
          err << json{{"warning", "NonNestedLadder"},
                      {"message", "model '" + run.model_id +
                                      "' does not contain every term of the previous model; comparing by DIC only"}}
                     .dump()
              << "\n";
        }
        previous = layout;
      }
    }
    runs.push_back(run);
    models.push_back(model);
  }

  const ComparisonReport report = compare_models(runs);
  json result = to_json(report);
  result["specs"] = models;
  files.write("ladder.json", pretty(result));
  json manifest{{"tool", kToolVersion},
                {"command", "ladder"},
                {"spec_hash", fnv1a(models.dump())},
                {"data", data_hashes(data)},
                {"seed", base.seed},
                {"run_seeds", {base.seed, base.seed + 1}},
                {"mcmc", config_json(base)},
                {"mass", mass},
                {"outputs", files.listing()}};
  write_file_atomic(files.dir() / "manifest.json", pretty(manifest));
  out << "selected " << report.selected << "\n";
  return 0;
}

int cmd_constraint_test(const DataFlags& data, const SpecFlags& sf, const std::string& free_spec_file,
                        const McmcFlags& mf, double mass, double alpha, const std::string& out_dir,
                        std::ostream& out) {
  const PanelDataset ds = read_dataset(paths_of(data));
  const CovariateNames names = CovariateNames::of(ds);
  if (sf.spec.empty()) throw Error(ErrorCode::Usage, "constraint-test needs --spec with equality constraints");
  ModelSpec constrained = spec_from_json(read_json_file(sf.spec), names);
  ModelSpec free = constrained;
  if (free_spec_file.empty()) {
    free.equality_constraints.clear();
    free.name = constrained.name + "_free";
  } else {
    free = spec_from_json(read_json_file(free_spec_file), names);
  }
  apply_overrides(constrained, sf);
  apply_overrides(free, sf);
  if (constrained.equality_constraints.size() <= free.equality_constraints.size()) {
    throw Error(ErrorCode::Usage, "the constrained spec must add at least one equality constraint");
  }
  const std::size_t df = constrained.equality_constraints.size() - free.equality_constraints.size();
  const McmcConfig config = config_of(mf);
  const FitRun free_fit = fit_model(ds, free, config, mass);
  const FitRun constrained_fit = fit_model(ds, constrained, config, mass);
  const ChiSquareTest test = chi_square_deviance_test(free_fit.summary.dic, constrained_fit.summary.dic, df, alpha);

  ensure_dir(out_dir);
  Outputs files(out_dir);
  json result = to_json(test);
  result["alpha"] = alpha;
  result["free"] = {{"model", free.name}, {"Dhat", free_fit.summary.dic.dhat}, {"DIC", free_fit.summary.dic.dic}};
  result["constrained"] = {{"model", constrained.name},
                           {"Dhat", constrained_fit.summary.dic.dhat},
                           {"DIC", constrained_fit.summary.dic.dic}};
  files.write("constraint_test.json", pretty(result));
  json manifest{{"tool", kToolVersion},
                {"command", "constraint-test"},
                {"spec_hash", spec_hash(constrained, names)},
                {"free_spec_hash", spec_hash(free, names)},
                {"data", data_hashes(data)},
                {"seed", config.seed},
                {"mcmc", config_json(config)},
                {"outputs", files.listing()}};
  write_file_atomic(files.dir() / "manifest.json", pretty(manifest));
  out << "chi-square " << test.statistic << " on " << test.df << " df, p = " << test.p_value
      << (test.reject_simplification ? " (keep separate coefficients)" : " (equality not rejected)") << "\n";
  return 0;
}

int cmd_simulate(const std::string& truth_file, std::uint64_t seed, const std::vector<std::size_t>& counts,
                 const std::string& out_dir, std::ostream& out) {
  GroundTruth truth = truth_from_json(read_json_file(truth_file));
  if (!counts.empty()) {
    if (counts.size() != 3) throw Error(ErrorCode::Usage, "--counts takes facilities, teams per facility, patients per team");
    truth.shape.n_facilities = counts[0];
    truth.shape.teams_per_facility = {counts[1], counts[1]};
    truth.shape.patients_per_team = {counts[2], counts[2]};
    validate_truth(truth);
  }
  const SyntheticPanel panel = generate(truth, seed);
  ensure_dir(out_dir);
  Outputs files(out_dir);
  files.write("patients.csv", patients_csv(panel.dataset));
  files.write("teams.csv", teams_csv(panel.dataset));
  files.write("facilities.csv", facilities_csv(panel.dataset));
  files.write("truth.json", pretty(truth_to_json(truth)));
  files.write("effects.json", pretty(ledger_to_json(panel.ledger)));
  const CovariateNames names = truth.names();
  json manifest{{"tool", kToolVersion},
                {"command", "simulate"},
                {"spec_hash", spec_hash(truth.spec, names)},
                {"truth_hash", fnv1a(truth_to_json(truth).dump())},
                {"seed", seed},
                {"outputs", files.listing()}};
  write_file_atomic(files.dir() / "manifest.json", pretty(manifest));
  out << "simulated " << panel.dataset.facilities.size() << " facilities, " << panel.dataset.teams.size()
      << " teams, " << panel.dataset.patients.size() << " patients -> " << out_dir << "\n";
  return 0;
}

int cmd_predict(const std::string& fit_dir, const std::string& requests_file, bool new_unit, double mass,
                const std::string& out_file, std::ostream& out) {
  const json layout_json = read_json_file(fs::path(fit_dir) / "layout.json");
  DesignLayout layout;
  long n_chains = 0;
  try {
    layout = layout_from_json(layout_json.at("design"));
    n_chains = layout_json.at("mcmc").at("chains").get<long>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::LayoutMismatch, std::string("layout.json is malformed: ") + e.what());
  }
  std::vector<ChainSamples> chains;
  for (long c = 0; c < n_chains; ++c) {
    chains.push_back(read_chain_csv(fs::path(fit_dir) / ("chain_" + std::to_string(c + 1) + ".csv"), layout));
  }

  CsvTable table;
  const std::string text = read_text(requests_file);
  if (!text.empty()) {
    std::istringstream in(text);
    table = parse_csv(in, requests_file);
  }
  std::vector<PredictionRequest> requests;
  std::vector<std::string> ids;
  if (!table.header.empty()) {
    requests = requests_from_csv(table, layout);
    const long id_col = table.column("request_id");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      ids.push_back(id_col >= 0 ? table.rows[r][static_cast<std::size_t>(id_col)] : std::to_string(r + 1));
    }
  }

  PredictOptions options;
  options.allow_new_units = new_unit;
  options.mass = mass;
  std::vector<PredictiveSummary> results;
  for (const auto& req : requests) results.push_back(posterior_predict(chains, layout, req, options));

  const std::string csv = predictions_csv(requests, results, layout, ids);
  const fs::path out_path(out_file);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  write_file_atomic(out_path, csv);
  json manifest{{"tool", kToolVersion},
                {"command", "predict"},
                {"spec_hash", spec_hash(layout.spec, layout.names)},
                {"layout_hash", fnv1a(read_text(fs::path(fit_dir) / "layout.json"))},
                {"requests_hash", fnv1a(text)},
                {"seed", layout_json.at("mcmc").at("seed")},
                {"mcmc", layout_json.at("mcmc")},
                {"new_unit", new_unit},
                {"mass", mass},
                {"outputs", {{out_path.filename().string(), fnv1a(csv)}}}};
  write_file_atomic(fs::path(out_file + ".manifest.json"), pretty(manifest));
  out << "predicted " << results.size() << " requests -> " << out_file << "\n";
  return 0;
}

int cmd_encode(const std::string& input, const std::vector<std::string>& columns, const std::string& prefix,
               const std::string& reference, const std::string& out_file, std::ostream& out) {
  if (!reference.empty() && columns.size() != 1) {
    throw Error(ErrorCode::Usage, "--reference applies to a single --column");
  }
  CsvTable table = read_csv(input);
  for (const auto& c : columns) {
    table = encode_categorical(table, c, prefix, reference.empty() ? std::nullopt : std::optional(reference));
  }
  std::ostringstream s;
  CsvWriter w(s);
  w.row(table.header);
  for (const auto& r : table.rows) w.row(r);
  write_file_atomic(out_file, s.str());
  out << "encoded " << columns.size() << " column(s) -> " << out_file << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Three-level multivariate hierarchical linear models fitted by Gibbs sampling", "hbmv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  DataFlags data;
  SpecFlags spec_flags;
  McmcFlags mcmc;
  double mass = 0.95;
  double alpha = 0.05;
  std::string out_dir;

  auto* fit = app.add_subcommand("fit", "Fit one model and write chains, summaries and tables");
  add_data_flags(fit, data);
  fit->add_option("--spec", spec_flags.spec, "Model spec JSON (default: unconditional model)");
  add_spec_flags(fit, spec_flags);
  add_mcmc_flags(fit, mcmc);
  fit->add_option("--mass", mass, "HPD mass")->capture_default_str();
  fit->add_option("--out", out_dir, "Output directory")->required();

  std::string ladder_file;
  auto* ladder = app.add_subcommand("ladder", "Fit a sequence of models twice each and compare DIC");
  add_data_flags(ladder, data);
  ladder->add_option("--ladder", ladder_file, "JSON list of model specs (default: six-model ladder)");
  add_spec_flags(ladder, spec_flags);
  add_mcmc_flags(ladder, mcmc);
  ladder->add_option("--mass", mass, "HPD mass")->capture_default_str();
  ladder->add_option("--out", out_dir, "Output directory")->required();

  std::string free_spec;
  auto* ctest = app.add_subcommand("constraint-test", "Chi-square deviance test of cross-outcome equality constraints");
  add_data_flags(ctest, data);
  ctest->add_option("--spec", spec_flags.spec, "Constrained model spec JSON")->required();
  ctest->add_option("--free-spec", free_spec, "Unconstrained spec (default: --spec without its constraints)");
  add_spec_flags(ctest, spec_flags);
  add_mcmc_flags(ctest, mcmc);
  ctest->add_option("--alpha", alpha, "Significance level")->capture_default_str();
  ctest->add_option("--out", out_dir, "Output directory")->required();

  std::string truth_file;
  std::uint64_t sim_seed = 1234567;
  std::vector<std::size_t> counts;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset from a ground-truth file");
  simulate->add_option("--truth", truth_file, "Ground-truth JSON")->required();
  simulate->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  simulate->add_option("--counts", counts, "Facilities, teams per facility, patients per team")->expected(3);
  simulate->add_option("--out", out_dir, "Output directory")->required();

  std::string fit_dir, requests_file, out_file;
  bool new_unit = false;
  auto* predict = app.add_subcommand("predict", "Posterior-predictive workload for request rows");
  predict->add_option("--fit", fit_dir, "Directory written by 'fit'")->required();
  predict->add_option("--requests", requests_file, "Request CSV")->required();
  predict->add_flag("--new-unit", new_unit, "Treat unknown team/facility ids as new units");
  predict->add_option("--mass", mass, "Predictive interval mass")->capture_default_str();
  predict->add_option("--out", out_file, "Predictions CSV")->required();

  std::string input, prefix = "x_", reference;
  std::vector<std::string> columns;
  auto* encode = app.add_subcommand("encode", "Reference-code categorical columns into 0/1 columns");
  encode->add_option("--input", input, "CSV to encode")->required();
  encode->add_option("--column", columns, "Categorical column (repeatable)")->required();
  encode->add_option("--prefix", prefix, "Prefix for the produced columns")->capture_default_str();
  encode->add_option("--reference", reference, "Reference level (default: first seen)");
  encode->add_option("--out", out_file, "Output CSV")->required();

  std::vector<std::string> argv_store{"hbmv"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit) return cmd_fit(data, spec_flags, mcmc, mass, out_dir, out);
    if (*ladder) return cmd_ladder(data, spec_flags, ladder_file, mcmc, mass, out_dir, out, err);
    if (*ctest) return cmd_constraint_test(data, spec_flags, free_spec, mcmc, mass, alpha, out_dir, out);
    if (*simulate) return cmd_simulate(truth_file, sim_seed, counts, out_dir, out);
    if (*predict) return cmd_predict(fit_dir, requests_file, new_unit, mass, out_file, out);
    if (*encode) return cmd_encode(input, columns, prefix, reference, out_file, out);
  } catch (const Error& e) {
    write_error(err, std::string(error_name(e.code())), e.what(), exit_code(e.code()));
    return exit_code(e.code());
  } catch (const std::exception& e) {
    write_error(err, "Unexpected", e.what(), 1);
    return 1;
  }
  return 1;
}

}  // namespace hbmv::cli
