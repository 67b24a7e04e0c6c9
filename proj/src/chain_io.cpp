#include "hbmv/chain_io.hpp"

#include <sstream>

#include "hbmv/csv.hpp"
#include "hbmv/error.hpp"

namespace hbmv {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::string> covariance_labels(const DesignLayout& layout, Level level) {
  switch (level) {
    case Level::Patient: {
      std::vector<std::string> out;
      for (std::size_t p = 0; p < layout.n_outcomes(); ++p) {
        out.push_back(p < layout.names.responses.size() ? layout.names.responses[p]
                                                        : "y_" + std::to_string(p + 1));
      }
      return out;
    }
    case Level::Team: return layout.team_effects.labels();
    case Level::Facility: return layout.facility_effects.labels();
  }
  return {};
}

std::string gamma_name(const std::string& column_label) { return "gamma[" + column_label + "]"; }

std::string sigma_name(Level level, const std::string& row, const std::string& col) {
  return "sigma_" + level_name(level) + "[" + row + "|" + col + "]";
}

std::vector<std::string> parameter_names(const DesignLayout& layout) {
  std::vector<std::string> names;
  for (const auto& label : layout.fixed.column_labels) names.push_back(gamma_name(label));
  const auto team_labels = layout.team_effects.labels();
  for (const auto& id : layout.team_ids) {
    for (const auto& label : team_labels) names.push_back("u_team[" + id + "|" + label + "]");
  }
  const auto fac_labels = layout.facility_effects.labels();
  for (const auto& id : layout.facility_ids) {
    for (const auto& label : fac_labels) names.push_back("u_facility[" + id + "|" + label + "]");
  }
  for (Level level : kLevels) {
    const auto labels = covariance_labels(layout, level);
    for (std::size_t r = 0; r < labels.size(); ++r) {
      for (std::size_t c = r; c < labels.size(); ++c) names.push_back(sigma_name(level, labels[r], labels[c]));
    }
  }
  return names;
}

namespace {

Index flat_size(const ParameterState& s) {
  auto tri = [](Index q) { return q * (q + 1) / 2; };
  return s.gamma.size() + s.team_effects.size() + s.facility_effects.size() + tri(s.sigma_patient.rows()) +
         tri(s.sigma_team.rows()) + tri(s.sigma_facility.rows());
}

void push_upper(const MatrixXd& m, VectorXd& out, Index& at) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = r; c < m.cols(); ++c) out(at++) = m(r, c);
  }
}

void pull_upper(const VectorXd& v, Index& at, MatrixXd& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = r; c < m.cols(); ++c) {
      m(r, c) = v(at);
      m(c, r) = v(at);
      ++at;
    }
  }
}

}  // namespace

VectorXd flatten(const ParameterState& s) {
  VectorXd out(flat_size(s));
  Index at = 0;
  out.segment(at, s.gamma.size()) = s.gamma;
  at += s.gamma.size();
  for (Index j = 0; j < s.team_effects.rows(); ++j) {
    out.segment(at, s.team_effects.cols()) = s.team_effects.row(j).transpose();
    at += s.team_effects.cols();
  }
  for (Index k = 0; k < s.facility_effects.rows(); ++k) {
    out.segment(at, s.facility_effects.cols()) = s.facility_effects.row(k).transpose();
    at += s.facility_effects.cols();
  }
  push_upper(s.sigma_patient, out, at);
  push_upper(s.sigma_team, out, at);
  push_upper(s.sigma_facility, out, at);
  return out;
}

ParameterState unflatten(const VectorXd& v, const DesignLayout& layout) {
  ParameterState s;
  const auto c = static_cast<Index>(layout.fixed.n_columns());
  const auto qt = static_cast<Index>(layout.team_effects.dim());
  const auto qf = static_cast<Index>(layout.facility_effects.dim());
  const auto P = static_cast<Index>(layout.n_outcomes());
  s.gamma.resize(c);
  s.team_effects.resize(static_cast<Index>(layout.n_teams()), qt);
  s.facility_effects.resize(static_cast<Index>(layout.n_facilities()), qf);
  s.sigma_patient.resize(P, P);
  s.sigma_team.resize(qt, qt);
  s.sigma_facility.resize(qf, qf);
  if (v.size() != flat_size(s)) {
    throw Error(ErrorCode::LayoutMismatch, "draw has " + std::to_string(v.size()) + " values, layout expects " +
                                               std::to_string(flat_size(s)));
  }
  Index at = 0;
  s.gamma = v.segment(at, c);
  at += c;
  for (Index j = 0; j < s.team_effects.rows(); ++j, at += qt) s.team_effects.row(j) = v.segment(at, qt).transpose();
  for (Index k = 0; k < s.facility_effects.rows(); ++k, at += qf) {
    s.facility_effects.row(k) = v.segment(at, qf).transpose();
  }
  pull_upper(v, at, s.sigma_patient);
  pull_upper(v, at, s.sigma_team);
  pull_upper(v, at, s.sigma_facility);
  return s;
}

void write_chain_csv(const std::filesystem::path& path, const ChainSamples& chain, const DesignLayout& layout) {
  std::ostringstream out;
  CsvWriter writer(out);
  auto header = parameter_names(layout);
  header.push_back("deviance");
  writer.row(header);
  std::vector<std::string> fields;
  for (std::size_t d = 0; d < chain.draws.size(); ++d) {
    const VectorXd flat = flatten(chain.draws[d]);
    fields.clear();
    fields.reserve(static_cast<std::size_t>(flat.size()) + 1);
    for (Index i = 0; i < flat.size(); ++i) fields.push_back(format_number(flat(i)));
    fields.push_back(format_number(chain.deviance[d]));
    writer.row(fields);
  }
  write_file_atomic(path, out.str());
}

ChainSamples read_chain_csv(const std::filesystem::path& path, const DesignLayout& layout) {
  const CsvTable table = read_csv(path);
  auto expected = parameter_names(layout);
  expected.push_back("deviance");
  if (table.header != expected) {
    throw Error(ErrorCode::LayoutMismatch, "columns of '" + path.string() + "' do not match the layout manifest");
  }
  ChainSamples chain;
  const auto n = static_cast<Index>(expected.size()) - 1;
  VectorXd values(n);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (Index i = 0; i < n; ++i) {
      values(i) = parse_number(row[static_cast<std::size_t>(i)], path.string() + " row " + std::to_string(r + 1));
    }
    chain.draws.push_back(unflatten(values, layout));
    chain.deviance.push_back(parse_number(row.back(), path.string() + " deviance"));
  }
  return chain;
}

nlohmann::json layout_manifest(const DesignLayout& layout, const McmcConfig& config) {
  nlohmann::json j;
  j["design"] = layout_to_json(layout);
  auto columns = parameter_names(layout);
  columns.push_back("deviance");
  j["columns"] = columns;
  j["mcmc"] = {{"iterations", config.n_iterations},
               {"burnin", config.n_burnin},
               {"thin", config.thin},
               {"chains", config.n_chains},
               {"seed", config.seed},
               {"retained_per_chain", config.retained()}};
  return j;
}

}  // namespace hbmv
