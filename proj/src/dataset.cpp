#include "hdselect/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hdselect/errors.hpp"

namespace hdselect {

namespace {

bool parse_double(const std::string& token, double& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

std::string format_level(double v) {
    // integral values print without a trailing ".0" so dummy names stay tidy
    if (std::floor(v) == v && std::fabs(v) < 1e15) {
        std::ostringstream os;
        os << static_cast<long long>(v);
        return os.str();
    }
    std::ostringstream os;
    os << v;
    return os.str();
}

void require_disjoint(const std::vector<std::vector<std::string>>& lists,
                      const std::vector<std::string>& labels) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t k = 0; k < lists.size(); ++k) {
        for (const auto& name : lists[k]) {
            auto [it, inserted] = seen.emplace(name, k);
            if (!inserted)
                throw UserError("model spec: '" + name + "' assigned to both " +
                                labels[it->second] + " and " + labels[k]);
        }
    }
}

}  // namespace

void Dataset::add_column(std::string name, std::vector<double> values) {
    if (index_.count(name)) throw UserError("duplicate column name: " + name);
    if (!names_.empty() && values.size() != n_rows_)
        throw UserError("column '" + name + "' has length " + std::to_string(values.size()) +
                        ", expected " + std::to_string(n_rows_));
    if (names_.empty()) n_rows_ = values.size();
    index_.emplace(name, names_.size());
    names_.push_back(std::move(name));
    cols_.push_back(std::move(values));
    levels_.emplace_back();
}

void Dataset::add_categorical(std::string name, std::vector<double> level_indices,
                              std::vector<std::string> levels) {
    add_column(std::move(name), std::move(level_indices));
    levels_.back() = std::move(levels);
}

bool Dataset::has_column(const std::string& name) const { return index_.count(name) > 0; }

int Dataset::column_index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : static_cast<int>(it->second);
}

const std::vector<double>& Dataset::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UserError("unknown column: " + name);
    return cols_[it->second];
}

const std::vector<double>& Dataset::column(std::size_t idx) const { return cols_.at(idx); }

bool Dataset::is_categorical(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UserError("unknown column: " + name);
    return !levels_[it->second].empty();
}

const std::vector<std::string>& Dataset::levels(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UserError("unknown column: " + name);
    return levels_[it->second];
}

Dataset Dataset::select_rows(const std::vector<int>& rows) const {
    Dataset out;
    out.panel_id = panel_id;
    out.time_id = time_id;
    out.cluster_id = cluster_id;
    for (std::size_t c = 0; c < names_.size(); ++c) {
        std::vector<double> v(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) v[r] = cols_[c][rows[r]];
        if (levels_[c].empty())
            out.add_column(names_[c], std::move(v));
        else
            out.add_categorical(names_[c], std::move(v), levels_[c]);
    }
    out.n_rows_ = rows.size();
    return out;
}

std::size_t Dataset::drop_missing(const std::vector<std::string>& used) {
    std::vector<int> keep;
    keep.reserve(n_rows_);
    for (std::size_t r = 0; r < n_rows_; ++r) {
        bool ok = true;
        for (const auto& name : used) {
            if (std::isnan(column(name)[r])) { ok = false; break; }
        }
        if (ok) keep.push_back(static_cast<int>(r));
    }
    const std::size_t dropped = n_rows_ - keep.size();
    if (dropped > 0) *this = select_rows(keep);
    return dropped;
}

Eigen::MatrixXd Dataset::matrix(const std::vector<std::string>& cols) const {
    Eigen::MatrixXd out(n_rows_, cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (is_categorical(cols[c]))
            throw UserError("column '" + cols[c] +
                            "' is categorical; one-hot encode it before use");
        const auto& v = column(cols[c]);
        for (std::size_t r = 0; r < n_rows_; ++r) out(r, c) = v[r];
    }
    return out;
}

Dataset load_csv(const std::string& path, const CsvOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UserError("cannot open file: " + path);

    // split into records honoring RFC-4180 quoting (newlines inside quotes)
    std::string content((std::istreambuf_iterator<char>(in)), {});
    if (content.size() >= 3 && static_cast<unsigned char>(content[0]) == 0xEF &&
        static_cast<unsigned char>(content[1]) == 0xBB &&
        static_cast<unsigned char>(content[2]) == 0xBF)
        content.erase(0, 3);

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    auto end_field = [&] {
        fields.push_back(field);
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(fields);
        fields.clear();
        row_has_content = false;
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char ch = content[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(ch);
            }
            continue;
        }
        if (ch == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (ch == options.delimiter) {
            end_field();
            row_has_content = true;
        } else if (ch == '\n') {
            if (row_has_content || !field.empty() || !fields.empty()) end_record();
        } else if (ch == '\r') {
            // swallowed; \r\n handled by the \n branch
        } else {
            field.push_back(ch);
            row_has_content = true;
        }
    }
    if (in_quotes) throw UserError(path + ": unterminated quoted field");
    if (row_has_content || !field.empty() || !fields.empty()) end_record();
    if (records.empty()) throw UserError(path + ": empty file");

    std::vector<std::string> header;
    std::size_t first_data = 0;
    if (options.header) {
        header = records[0];
        first_data = 1;
    } else {
        for (std::size_t c = 0; c < records[0].size(); ++c)
            header.push_back("v" + std::to_string(c + 1));
    }
    std::set<std::string> seen;
    for (const auto& name : header)
        if (!seen.insert(name).second)
            throw UserError(path + ": duplicate header name '" + name + "'");

    const std::size_t width = header.size();
    const std::size_t n = records.size() - first_data;
    auto is_na = [&](const std::string& tok) {
        return std::find(options.na_markers.begin(), options.na_markers.end(), tok) !=
               options.na_markers.end();
    };

    std::vector<std::vector<double>> numeric(width, std::vector<double>(n));
    std::vector<std::vector<std::string>> raw(width, std::vector<std::string>(n));
    std::vector<bool> any_numeric(width, false), any_text(width, false);
    std::vector<std::pair<std::size_t, std::size_t>> first_text(width, {0, 0});

    for (std::size_t r = 0; r < n; ++r) {
        const auto& rec = records[first_data + r];
        if (rec.size() != width)
            throw UserError(path + ": line " + std::to_string(first_data + r + 1) + " has " +
                            std::to_string(rec.size()) + " fields, expected " +
                            std::to_string(width));
        for (std::size_t c = 0; c < width; ++c) {
            const std::string& tok = rec[c];
            if (is_na(tok)) {
                numeric[c][r] = std::nan("");
                raw[c][r].clear();
                continue;
            }
            double v;
            if (parse_double(tok, v)) {
                numeric[c][r] = v;
                any_numeric[c] = true;
            } else {
                if (!any_text[c]) first_text[c] = {first_data + r + 1, c + 1};
                any_text[c] = true;
                numeric[c][r] = std::nan("");
            }
            raw[c][r] = tok;
        }
    }

    Dataset ds;
    for (std::size_t c = 0; c < width; ++c) {
        if (any_text[c] && any_numeric[c])
            throw UserError(path + ": non-numeric value at line " +
                            std::to_string(first_text[c].first) + ", column " +
                            std::to_string(first_text[c].second) + " ('" + header[c] +
                            "')");
        if (any_text[c]) {
            // categorical column: levels sorted lexicographically
            std::set<std::string> level_set;
            for (std::size_t r = 0; r < n; ++r)
                if (!is_na(records[first_data + r][c])) level_set.insert(raw[c][r]);
            std::vector<std::string> levels(level_set.begin(), level_set.end());
            std::vector<double> idx(n);
            for (std::size_t r = 0; r < n; ++r) {
                if (is_na(records[first_data + r][c])) {
                    idx[r] = std::nan("");
                } else {
                    idx[r] = static_cast<double>(
                        std::lower_bound(levels.begin(), levels.end(), raw[c][r]) -
                        levels.begin());
                }
            }
            ds.add_categorical(header[c], std::move(idx), std::move(levels));
        } else {
            ds.add_column(header[c], std::move(numeric[c]));
        }
    }
    return ds;
}

std::vector<std::string> ModelSpec::penalized() const {
    std::vector<std::string> out = auxiliary_penalized;
    out.insert(out.end(), hd_controls_penalized.begin(), hd_controls_penalized.end());
    return out;
}

std::vector<std::string> ModelSpec::all_columns() const {
    std::vector<std::string> out{dependent};
    for (const auto* list :
         {&treatments, &focal_unpenalized, &auxiliary_penalized, &hd_controls_penalized,
          &instruments_penalized, &instruments_unpenalized, &amelioration_set, &partial_out}) {
        out.insert(out.end(), list->begin(), list->end());
    }
    if (options.cluster) out.push_back(*options.cluster);
    return out;
}

void ModelSpec::validate(const Dataset& ds, bool needs_unpenalized) const {
    if (dependent.empty()) throw UserError("model spec: dependent variable missing");

    // treatments may repeat in `endogenous` (it is a subset); everything else
    // must be pairwise disjoint, and nothing may reuse the dependent.
    std::vector<std::string> non_endog_treatments;
    std::set<std::string> endog_set(endogenous.begin(), endogenous.end());
    for (const auto& t : treatments)
        if (!endog_set.count(t)) non_endog_treatments.push_back(t);
    require_disjoint(
        {non_endog_treatments, endogenous, focal_unpenalized, auxiliary_penalized,
         hd_controls_penalized, instruments_penalized, instruments_unpenalized,
         amelioration_set, partial_out},
        {"treatments", "endogenous", "unpenalized regressors", "penalized regressors",
         "hd controls", "instruments", "unpenalized instruments", "amelioration set",
         "partial-out set"});

    for (const auto& e : endogenous)
        if (!std::count(treatments.begin(), treatments.end(), e))
            throw UserError("model spec: endogenous variable '" + e +
                            "' is not listed as a treatment");
    if (!endogenous.empty() && instruments_penalized.empty() && instruments_unpenalized.empty())
        throw UserError("model spec: endogenous variables declared but no instruments given");
    if (endogenous.empty() &&
        (!instruments_penalized.empty() || !instruments_unpenalized.empty()))
        throw UserError("model spec: instruments given but no endogenous variable");

    std::set<std::string> others;
    for (const auto* list :
         {&treatments, &focal_unpenalized, &auxiliary_penalized, &hd_controls_penalized,
          &instruments_penalized, &instruments_unpenalized, &amelioration_set, &partial_out})
        for (const auto& name : *list) others.insert(name);
    if (others.count(dependent))
        throw UserError("model spec: dependent '" + dependent + "' also used as a regressor");

    for (const auto& name : all_columns())
        if (!ds.has_column(name)) throw UserError("model spec: unknown column '" + name + "'");

    if (needs_unpenalized && treatments.empty() && focal_unpenalized.empty() &&
        partial_out.empty())
        throw UserError(
            "model spec: this estimator requires at least one unpenalized regressor");
}

const StandardizationRecord::Entry* StandardizationRecord::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

StandardizeResult standardize(const Dataset& ds, const std::vector<std::string>& penalized,
                              const std::vector<std::string>& unpenalized,
                              const std::vector<std::string>& center_only) {
    StandardizeResult res;
    const auto n = static_cast<double>(ds.n_rows());
    if (ds.n_rows() == 0) throw UserError("standardize: empty dataset");

    Dataset out;
    out.panel_id = ds.panel_id;
    out.time_id = ds.time_id;
    out.cluster_id = ds.cluster_id;

    enum class Role { penalized, unpenalized, center };
    std::unordered_map<std::string, Role> role;
    for (const auto& c : penalized) role.emplace(c, Role::penalized);
    for (const auto& c : unpenalized) role.emplace(c, Role::unpenalized);
    for (const auto& c : center_only) role.emplace(c, Role::center);
    for (const auto& c : penalized) (void)ds.column(c);
    for (const auto& c : unpenalized) (void)ds.column(c);
    for (const auto& c : center_only) (void)ds.column(c);

    for (const auto& name : ds.names()) {
        const auto& v = ds.column(name);
        auto it = role.find(name);
        if (it == role.end()) {
            if (ds.is_categorical(name))
                out.add_categorical(name, v, ds.levels(name));
            else
                out.add_column(name, v);
            res.record.entries.push_back({name, 0.0, 1.0, ScaleFlag::untouched});
            continue;
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= n;  // divisor N so that sum of squares is exactly N
        const double scale = std::sqrt(var);

        if (it->second == Role::center) {
            std::vector<double> w(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] - mean;
            out.add_column(name, std::move(w));
            res.record.entries.push_back({name, mean, 1.0, ScaleFlag::centered});
            continue;
        }
        if (scale <= 0.0 || !std::isfinite(scale)) {
            if (it->second == Role::penalized)
                throw UserError("standardize: penalized column '" + name +
                                "' is constant (zero scale)");
            res.dropped_constant.push_back(name);
            res.record.entries.push_back({name, mean, 1.0, ScaleFlag::constant});
            continue;  // absorbed by the intercept downstream
        }
        std::vector<double> w(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) w[i] = (v[i] - mean) / scale;
        out.add_column(name, std::move(w));
        res.record.entries.push_back({name, mean, scale, ScaleFlag::standardized});
    }
    res.data = std::move(out);
    return res;
}

Dataset one_hot_encode(const Dataset& ds, const std::string& column, bool drop_reference) {
    const auto& values = ds.column(column);
    std::vector<std::string> level_names;
    std::vector<double> codes(values.size());
    if (ds.is_categorical(column)) {
        level_names = ds.levels(column);
        codes = values;
    } else {
        std::set<double> distinct;
        for (double v : values) {
            if (std::isnan(v)) continue;
            distinct.insert(v);
        }
        std::vector<double> sorted(distinct.begin(), distinct.end());
        // name levels by value, ordering lexicographically by printed form so
        // the reference rule is the same for text and numeric columns
        std::vector<std::pair<std::string, double>> named;
        for (double v : sorted) named.emplace_back(format_level(v), v);
        std::sort(named.begin(), named.end());
        std::unordered_map<double, double> code_of;
        for (std::size_t k = 0; k < named.size(); ++k) {
            level_names.push_back(named[k].first);
            code_of[named[k].second] = static_cast<double>(k);
        }
        for (std::size_t i = 0; i < values.size(); ++i)
            codes[i] = std::isnan(values[i]) ? std::nan("") : code_of[values[i]];
    }
    const std::size_t k = level_names.size();
    if (k < 2) throw UserError("one_hot_encode: column '" + column + "' is constant");

    const std::size_t start = drop_reference ? 1 : 0;  // reference = first level
    std::vector<std::string> dummy_names;
    for (std::size_t l = start; l < k; ++l) {
        std::string dn = column + "_" + level_names[l];
        if (ds.has_column(dn))
            throw UserError("one_hot_encode: dummy name '" + dn +
                            "' collides with an existing column");
        dummy_names.push_back(std::move(dn));
    }

    Dataset out;
    out.panel_id = ds.panel_id;
    out.time_id = ds.time_id;
    out.cluster_id = ds.cluster_id;
    for (const auto& name : ds.names()) {
        if (name != column) {
            if (ds.is_categorical(name))
                out.add_categorical(name, ds.column(name), ds.levels(name));
            else
                out.add_column(name, ds.column(name));
            continue;
        }
        for (std::size_t l = start; l < k; ++l) {
            std::vector<double> dummy(values.size());
            for (std::size_t i = 0; i < values.size(); ++i) {
                dummy[i] = std::isnan(codes[i])
                               ? std::nan("")
                               : (static_cast<std::size_t>(codes[i]) == l ? 1.0 : 0.0);
            }
            out.add_column(dummy_names[l - start], std::move(dummy));
        }
    }
    return out;
}

OriginalScaleFit destandardize(const Eigen::VectorXd& coeffs,
                               const std::vector<std::string>& names,
                               const StandardizationRecord& record,
                               const std::string& dependent) {
    if (coeffs.size() != static_cast<Eigen::Index>(names.size()))
        throw UserError("destandardize: coefficient / name length mismatch");
    const auto* dep = record.find(dependent);
    if (!dep) throw UserError("destandardize: dependent '" + dependent + "' not in record");

    OriginalScaleFit out;
    out.coefficients.resize(names.size());
    double intercept = dep->mean;  // y was centered; fits have zero intercept
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto* e = record.find(names[j]);
        if (!e) throw UserError("destandardize: column '" + names[j] + "' not in record");
        const double b = coeffs(static_cast<Eigen::Index>(j)) / e->scale;
        out.coefficients[j] = b;
        intercept -= b * e->mean;
    }
    out.intercept = intercept;
    return out;
}

}  // namespace hdselect
