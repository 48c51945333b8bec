#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "ews/core/error.hpp"

namespace ews {

enum class ColumnKind { numeric, categorical };

// Where a column came from; written to matrix manifests.
struct Provenance {
  std::string source;  // background | ca | activity | cumulative | cluster_label | cluster_prob | indicator
  std::string field;   // background field, CA item or originating column
  int folder = 0;
  int week = 0;
  std::string day_class;
  std::string encoding;  // raw | running_score | count | cumulative_count | level_index | indicator | probability
};

struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> levels;  // categorical only; cell value = level index
  Provenance provenance;

  int n_levels() const { return static_cast<int>(levels.size()); }
};

// Dense design matrix with named, typed columns. Categorical cells hold the
// level index as a double.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<ColumnInfo> columns;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  bool all_numeric() const {
    for (auto& c : columns)
      if (c.kind != ColumnKind::numeric) return false;
    return true;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (auto& c : columns) out.push_back(c.name);
    return out;
  }

  long index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return static_cast<long>(i);
    return -1;
  }

  DesignMatrix select_rows(const std::vector<Eigen::Index>& rows_) const {
    DesignMatrix out;
    out.columns = columns;
    out.values.resize(static_cast<Eigen::Index>(rows_.size()), values.cols());
    for (std::size_t i = 0; i < rows_.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows_[i]);
    return out;
  }
};

// Reorders `m`'s columns into `manifest` order. Throws if a manifest column is
// missing or `m` carries a column the manifest does not know.
inline Eigen::MatrixXd align_columns(const DesignMatrix& m, const std::vector<std::string>& manifest) {
  std::map<std::string, Eigen::Index> pos;
  for (std::size_t i = 0; i < m.columns.size(); ++i) pos[m.columns[i].name] = static_cast<Eigen::Index>(i);
  if (pos.size() != m.columns.size()) throw ArgumentError("duplicate column names in prediction input");
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(manifest.size()));
  std::size_t matched = 0;
  for (std::size_t j = 0; j < manifest.size(); ++j) {
    auto it = pos.find(manifest[j]);
    if (it == pos.end()) throw ArgumentError("prediction input lacks training column '" + manifest[j] + "'");
    out.col(static_cast<Eigen::Index>(j)) = m.values.col(it->second);
    ++matched;
  }
  if (matched != m.columns.size()) {
    for (auto& c : m.columns)
      if (std::find(manifest.begin(), manifest.end(), c.name) == manifest.end())
        throw ArgumentError("unknown column '" + c.name + "' not seen in training");
  }
  return out;
}

}  // namespace ews
