#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hbmv/csv.hpp"
#include "hbmv/dataset.hpp"

namespace hbmv {

struct DatasetPaths {
  std::filesystem::path patients;
  std::optional<std::filesystem::path> teams;
  std::optional<std::filesystem::path> facilities;
};

// Patient rows: patient_id, team_id, facility_id, y_*, x_*.
// Team rows: team_id, facility_id, z_*.  Facility rows: facility_id, w_*.
// Without a team (facility) file, units are taken from the patient (team)
// rows and carry no covariates. A patient whose facility_id disagrees with
// its team's facility raises CrossNesting.
PanelDataset read_dataset(const DatasetPaths& paths);
PanelDataset dataset_from_tables(const CsvTable& patients, const CsvTable* teams, const CsvTable* facilities);

// Writes patients.csv, teams.csv and facilities.csv into `dir`.
void write_dataset(const std::filesystem::path& dir, const PanelDataset& dataset);

std::string patients_csv(const PanelDataset& dataset);
std::string teams_csv(const PanelDataset& dataset);
std::string facilities_csv(const PanelDataset& dataset);

// Reference coding of one categorical column: each level other than the
// first-seen (or `reference`) becomes a 0/1 column named <prefix><column>_<level>.
CsvTable encode_categorical(const CsvTable& table, const std::string& column, const std::string& prefix,
                            const std::optional<std::string>& reference);

}  // namespace hbmv
