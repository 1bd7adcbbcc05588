#ifndef HOLOGEN_TSV_HPP
#define HOLOGEN_TSV_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace hologen::tsv {

/// A labelled numeric matrix as stored on disk: one header row with the
/// column ids, one leading id column with the row ids, tab-separated,
/// '.' decimal point, no quoting.
struct Table {
    std::string corner;                // header of the id column
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;
    Eigen::MatrixXd values;            // row_ids.size() x col_ids.size()
};

Table read_table(const std::filesystem::path& path);

/// When `integer` is set values are written as integers (they must be
/// integral already); otherwise with 17 significant digits, which
/// round-trips doubles exactly.
void write_table(const std::filesystem::path& path, const Table& table, bool integer = false);

/// Formats a double with up to 17 significant digits, locale-independent.
std::string format_real(double v);

/// Locale-independent strtod over a whole token; throws DataError on junk.
double parse_real(const std::string& token, const std::string& context);

} // namespace hologen::tsv

#endif
