#include "hdselect/panelfx.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hdselect/errors.hpp"

namespace hdselect::panelfx {

PanelIndex make_panel_index(const Dataset& ds, const std::string& panel_id,
                            const std::string& time_id) {
    PanelIndex index;
    index.panel_id = panel_id;
    index.time_id = time_id;
    const auto& ids = ds.column(panel_id);
    const std::vector<double>* times = time_id.empty() ? nullptr : &ds.column(time_id);

    std::map<double, std::vector<int>> by_unit;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        if (std::isnan(ids[r])) throw UserError("panel: missing panel id in row " +
                                                std::to_string(r + 1));
        by_unit[ids[r]].push_back(static_cast<int>(r));
    }
    for (auto& [unit, rows] : by_unit) {
        if (times) {
            std::stable_sort(rows.begin(), rows.end(),
                             [&](int a, int b) { return (*times)[a] < (*times)[b]; });
            for (std::size_t i = 1; i < rows.size(); ++i)
                if ((*times)[rows[i]] == (*times)[rows[i - 1]])
                    throw UserError("panel: duplicate time id within unit " +
                                    std::to_string(unit));
        }
        index.groups.push_back(std::move(rows));
    }
    return index;
}

WithinResult within_transform(const Dataset& ds, const PanelIndex& index,
                              const std::vector<std::string>& columns) {
    WithinResult res;
    res.data = ds;
    bool warned_singleton = false;
    for (const auto& rows : index.groups)
        if (rows.size() == 1 && !warned_singleton) {
            res.warnings.push_back(
                "within: singleton panel groups contribute only zeros");
            warned_singleton = true;
        }

    Dataset out;
    out.panel_id = ds.panel_id;
    out.time_id = ds.time_id;
    out.cluster_id = ds.cluster_id;
    for (const auto& name : ds.names()) {
        if (!std::count(columns.begin(), columns.end(), name)) {
            if (ds.is_categorical(name))
                out.add_categorical(name, ds.column(name), ds.levels(name));
            else
                out.add_column(name, ds.column(name));
            continue;
        }
        std::vector<double> v = ds.column(name);
        for (const auto& rows : index.groups) {
            double mean = 0.0;
            for (int r : rows) mean += v[r];
            mean /= static_cast<double>(rows.size());
            for (int r : rows) v[r] -= mean;
        }
        out.add_column(name, std::move(v));
    }
    res.data = std::move(out);
    return res;
}

FirstDifferenceResult first_difference(const Dataset& ds, const PanelIndex& index,
                                       const std::vector<std::string>& columns,
                                       bool allow_gaps) {
    if (index.time_id.empty())
        throw UserError("first_difference: a time id is required");
    const auto& times = ds.column(index.time_id);

    FirstDifferenceResult res;
    std::vector<int> keep;  // rows surviving (every unit's first row dropped)
    bool warned_gap = false;
    for (const auto& rows : index.groups) {
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double gap = times[rows[i]] - times[rows[i - 1]];
            if (gap != 1.0) {
                if (!allow_gaps)
                    throw UserError("first_difference: gap in time id within a unit (" +
                                    std::to_string(times[rows[i - 1]]) + " -> " +
                                    std::to_string(times[rows[i]]) +
                                    "); pass allow_gaps to difference across it");
                if (!warned_gap) {
                    res.warnings.push_back(
                        "first_difference: differencing across time-id gaps");
                    warned_gap = true;
                }
            }
            keep.push_back(rows[i]);
        }
    }
    std::sort(keep.begin(), keep.end());

    // previous-row lookup per kept row
    std::vector<int> prev(ds.n_rows(), -1);
    for (const auto& rows : index.groups)
        for (std::size_t i = 1; i < rows.size(); ++i) prev[rows[i]] = rows[i - 1];

    Dataset out;
    out.panel_id = ds.panel_id;
    out.time_id = ds.time_id;
    out.cluster_id = ds.cluster_id;
    for (const auto& name : ds.names()) {
        const auto& v = ds.column(name);
        std::vector<double> w(keep.size());
        const bool do_diff = std::count(columns.begin(), columns.end(), name) > 0;
        for (std::size_t i = 0; i < keep.size(); ++i)
            w[i] = do_diff ? v[keep[i]] - v[prev[keep[i]]] : v[keep[i]];
        if (!do_diff && ds.is_categorical(name))
            out.add_categorical(name, std::move(w), ds.levels(name));
        else
            out.add_column(name, std::move(w));
    }
    res.data = std::move(out);
    res.n_rows = static_cast<int>(keep.size());
    return res;
}

}  // namespace hdselect::panelfx
