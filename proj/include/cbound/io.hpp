#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cbound {

// Shortest decimal that round-trips to the same double.
std::string format_number(double value);

std::vector<std::string> split_csv_line(std::string_view line);
double parse_number(std::string_view field);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

std::uint64_t fnv1a(std::string_view data) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace cbound
