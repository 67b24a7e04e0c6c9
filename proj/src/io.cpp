#include "hbmv/io.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hbmv/error.hpp"

namespace hbmv {
namespace {

bool has_prefix(const std::string& s, const std::string& prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

struct Columns {
  std::vector<std::size_t> index;
  std::vector<std::string> names;
};

std::size_t required(const CsvTable& t, const std::string& name, const std::string& source) {
  const long c = t.column(name);
  if (c < 0) throw Error(ErrorCode::DimensionMismatch, source + " lacks a '" + name + "' column");
  return static_cast<std::size_t>(c);
}

// Every header is either an id column or carries one of the given prefixes.
Columns prefixed(const CsvTable& t, const std::string& prefix, const std::vector<std::string>& allowed,
                 const std::vector<std::string>& other_prefixes, const std::string& source) {
  Columns out;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    const auto& h = t.header[c];
    if (std::find(allowed.begin(), allowed.end(), h) != allowed.end()) continue;
    if (has_prefix(h, prefix)) {
      out.index.push_back(c);
      out.names.push_back(h);
      continue;
    }
    bool other = false;
    for (const auto& p : other_prefixes) other = other || has_prefix(h, p);
    if (!other) {
      throw Error(ErrorCode::ParseError, source + ": column '" + h + "' has no recognised prefix (" + prefix +
                                             "...); encode categorical columns first");
    }
  }
  return out;
}

std::vector<double> numbers(const std::vector<std::string>& row, const std::vector<std::size_t>& cols,
                            const std::vector<std::string>& names, const std::string& context) {
  std::vector<double> out;
  out.reserve(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) out.push_back(parse_number(row[cols[i]], context + " " + names[i]));
  return out;
}

std::string nonempty_id(const std::string& id, const std::string& what, const std::string& context) {
  if (id.empty()) throw Error(ErrorCode::MissingValue, context + ": empty " + what);
  return id;
}

}  // namespace

PanelDataset dataset_from_tables(const CsvTable& patients, const CsvTable* teams, const CsvTable* facilities) {
  PanelDataset ds;
  const std::string psrc = "patient file";
  const auto pid = required(patients, "patient_id", psrc);
  const auto ptid = required(patients, "team_id", psrc);
  const auto pfid = required(patients, "facility_id", psrc);
  const std::vector<std::string> pids{"patient_id", "team_id", "facility_id"};
  const Columns ycols = prefixed(patients, "y_", pids, {"x_"}, psrc);
  const Columns xcols = prefixed(patients, "x_", pids, {"y_"}, psrc);
  if (ycols.index.empty()) throw Error(ErrorCode::DimensionMismatch, psrc + " has no y_ response columns");
  ds.response_names = ycols.names;
  ds.patient_covariate_names = xcols.names;

  // team id -> facility id as declared by patient rows (first occurrence)
  std::map<std::string, std::string> facility_of_team_in_patients;
  for (std::size_t r = 0; r < patients.rows.size(); ++r) {
    const auto& row = patients.rows[r];
    const std::string ctx = psrc + " row " + std::to_string(r + 2);
    PatientRecord p;
    p.id = nonempty_id(row[pid], "patient_id", ctx);
    p.team_id = nonempty_id(row[ptid], "team_id", ctx);
    const std::string fid = nonempty_id(row[pfid], "facility_id", ctx);
    auto [it, inserted] = facility_of_team_in_patients.emplace(p.team_id, fid);
    if (!inserted && it->second != fid) {
      throw Error(ErrorCode::CrossNesting, "team '" + p.team_id + "' appears under facilities '" + it->second +
                                               "' and '" + fid + "' in the patient file");
    }
    p.responses = numbers(row, ycols.index, ycols.names, ctx);
    p.covariates = numbers(row, xcols.index, xcols.names, ctx);
    ds.patients.push_back(std::move(p));
  }

  if (teams != nullptr) {
    const std::string tsrc = "team file";
    const auto tid = required(*teams, "team_id", tsrc);
    const auto tfid = required(*teams, "facility_id", tsrc);
    const Columns zcols = prefixed(*teams, "z_", {"team_id", "facility_id"}, {}, tsrc);
    ds.team_covariate_names = zcols.names;
    for (std::size_t r = 0; r < teams->rows.size(); ++r) {
      const auto& row = teams->rows[r];
      const std::string ctx = tsrc + " row " + std::to_string(r + 2);
      TeamRecord t;
      t.id = nonempty_id(row[tid], "team_id", ctx);
      t.facility_id = nonempty_id(row[tfid], "facility_id", ctx);
      t.covariates = numbers(row, zcols.index, zcols.names, ctx);
      auto it = facility_of_team_in_patients.find(t.id);
      if (it != facility_of_team_in_patients.end() && it->second != t.facility_id) {
        throw Error(ErrorCode::CrossNesting, "team '" + t.id + "' belongs to facility '" + t.facility_id +
                                                 "' but its patients name facility '" + it->second + "'");
      }
      ds.teams.push_back(std::move(t));
    }
  } else {
    for (const auto& [id, fid] : facility_of_team_in_patients) ds.teams.push_back({id, fid, {}});
  }

  if (facilities != nullptr) {
    const std::string fsrc = "facility file";
    const auto fid = required(*facilities, "facility_id", fsrc);
    const Columns wcols = prefixed(*facilities, "w_", {"facility_id"}, {}, fsrc);
    ds.facility_covariate_names = wcols.names;
    for (std::size_t r = 0; r < facilities->rows.size(); ++r) {
      const auto& row = facilities->rows[r];
      const std::string ctx = fsrc + " row " + std::to_string(r + 2);
      FacilityRecord f;
      f.id = nonempty_id(row[fid], "facility_id", ctx);
      f.covariates = numbers(row, wcols.index, wcols.names, ctx);
      ds.facilities.push_back(std::move(f));
    }
  } else {
    std::map<std::string, bool> seen;
    for (const auto& t : ds.teams) seen.emplace(t.facility_id, true);
    for (const auto& [id, unused] : seen) ds.facilities.push_back({id, {}});
  }
  return ds;
}

PanelDataset read_dataset(const DatasetPaths& paths) {
  const CsvTable patients = read_csv(paths.patients);
  std::optional<CsvTable> teams, facilities;
  if (paths.teams) teams = read_csv(*paths.teams);
  if (paths.facilities) facilities = read_csv(*paths.facilities);
  return dataset_from_tables(patients, teams ? &*teams : nullptr, facilities ? &*facilities : nullptr);
}

std::string patients_csv(const PanelDataset& ds) {
  std::unordered_map<std::string, std::string> facility_of;
  for (const auto& t : ds.teams) facility_of.emplace(t.id, t.facility_id);
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"patient_id", "team_id", "facility_id"};
  header.insert(header.end(), ds.response_names.begin(), ds.response_names.end());
  header.insert(header.end(), ds.patient_covariate_names.begin(), ds.patient_covariate_names.end());
  w.row(header);
  std::vector<std::string> fields;
  for (const auto& p : ds.patients) {
    fields = {p.id, p.team_id, facility_of.count(p.team_id) ? facility_of.at(p.team_id) : std::string()};
    for (double v : p.responses) fields.push_back(format_number(v));
    for (double v : p.covariates) fields.push_back(format_number(v));
    w.row(fields);
  }
  return out.str();
}

std::string teams_csv(const PanelDataset& ds) {
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"team_id", "facility_id"};
  header.insert(header.end(), ds.team_covariate_names.begin(), ds.team_covariate_names.end());
  w.row(header);
  for (const auto& t : ds.teams) {
    std::vector<std::string> fields{t.id, t.facility_id};
    for (double v : t.covariates) fields.push_back(format_number(v));
    w.row(fields);
  }
  return out.str();
}

std::string facilities_csv(const PanelDataset& ds) {
  std::ostringstream out;
  CsvWriter w(out);
  std::vector<std::string> header{"facility_id"};
  header.insert(header.end(), ds.facility_covariate_names.begin(), ds.facility_covariate_names.end());
  w.row(header);
  for (const auto& f : ds.facilities) {
    std::vector<std::string> fields{f.id};
    for (double v : f.covariates) fields.push_back(format_number(v));
    w.row(fields);
  }
  return out.str();
}

void write_dataset(const std::filesystem::path& dir, const PanelDataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory '" + dir.string() + "': " + ec.message());
  write_file_atomic(dir / "patients.csv", patients_csv(dataset));
  write_file_atomic(dir / "teams.csv", teams_csv(dataset));
  write_file_atomic(dir / "facilities.csv", facilities_csv(dataset));
}

CsvTable encode_categorical(const CsvTable& table, const std::string& column, const std::string& prefix,
                            const std::optional<std::string>& reference) {
  const long c = table.column(column);
  if (c < 0) throw Error(ErrorCode::DimensionMismatch, "no column named '" + column + "'");
  const auto col = static_cast<std::size_t>(c);
  std::vector<std::string> levels;
  for (const auto& row : table.rows) {
    if (row[col].empty()) throw Error(ErrorCode::MissingValue, "column '" + column + "' has an empty level");
    if (std::find(levels.begin(), levels.end(), row[col]) == levels.end()) levels.push_back(row[col]);
  }
  std::string ref = levels.empty() ? std::string() : levels.front();
  if (reference) {
    if (std::find(levels.begin(), levels.end(), *reference) == levels.end()) {
      throw Error(ErrorCode::InvalidSpec, "reference level '" + *reference + "' does not occur in '" + column + "'");
    }
    ref = *reference;
  }
  std::vector<std::string> dummies;
  for (const auto& l : levels) {
    if (l != ref) dummies.push_back(l);
  }
  std::sort(dummies.begin(), dummies.end());

  CsvTable out;
  for (std::size_t h = 0; h < table.header.size(); ++h) {
    if (h != col) out.header.push_back(table.header[h]);
  }
  for (const auto& l : dummies) out.header.push_back(prefix + column + "_" + l);
  for (const auto& row : table.rows) {
    std::vector<std::string> r;
    for (std::size_t h = 0; h < row.size(); ++h) {
      if (h != col) r.push_back(row[h]);
    }
    for (const auto& l : dummies) r.push_back(row[col] == l ? "1" : "0");
    out.rows.push_back(std::move(r));
  }
  return out;
}

}  // namespace hbmv
