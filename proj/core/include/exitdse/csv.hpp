#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace exitdse {

// 9 significant digits, the serialisation precision used by every artifact
std::string format_g9(double v);
// confidences are stored with 6 fixed fractional digits
std::string format_conf6(double v);
double parse_double(const std::string& text, const std::string& field);
long long parse_int(const std::string& text, const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Reads a comma-separated file. Lines starting with '#' (e.g. the embedded
// manifest fingerprint) and blank lines are skipped. No quoting: none of the
// formats used here ever contains a comma inside a field.
CsvTable read_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace exitdse
