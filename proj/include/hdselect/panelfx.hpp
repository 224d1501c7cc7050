#pragma once
#include <string>
#include <vector>

#include "hdselect/dataset.hpp"

namespace hdselect::panelfx {

// Group structure of a panel: rows mapped to units, optionally ordered by a
// time identifier inside each unit.
struct PanelIndex {
    std::string panel_id;
    std::string time_id;              // empty if absent
    std::vector<std::vector<int>> groups;  // row indices per unit, time-sorted

    int n_groups() const { return static_cast<int>(groups.size()); }
};

// Build the index from the dataset's id columns. time_id must be unique
// within each unit when present.
PanelIndex make_panel_index(const Dataset& ds, const std::string& panel_id,
                            const std::string& time_id = "");

struct WithinResult {
    Dataset data;
    std::vector<std::string> warnings;  // singleton groups contribute only zeros
};

// Subtract unit means from the listed columns ("within" transform). No
// constant or unit-effect parameters are estimated afterwards.
WithinResult within_transform(const Dataset& ds, const PanelIndex& index,
                              const std::vector<std::string>& columns);

struct FirstDifferenceResult {
    Dataset data;      // first row of every unit dropped
    int n_rows = 0;
    std::vector<std::string> warnings;
};

// value_t - value_{t-1} within each unit; requires a time id. Gaps in the
// time id are an error unless allow_gaps (then differenced across the gap
// with a warning).
FirstDifferenceResult first_difference(const Dataset& ds, const PanelIndex& index,
                                       const std::vector<std::string>& columns,
                                       bool allow_gaps = false);

}  // namespace hdselect::panelfx
