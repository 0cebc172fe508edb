#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "ratweyl/direct.hpp"
#include "ratweyl/inverse.hpp"
#include "ratweyl/sgordon.hpp"
#include "ratweyl/synthesis.hpp"

namespace ratweyl::io {

// 64-bit FNV-1a; used to stamp every artifact with the config it came from.
std::uint64_t fnv1a(const std::string& text);
std::string hash_tag(const std::string& text);

// Writers emit one metadata line ("# ratweyl <kind> config=<hash> k=v ..."),
// a header row naming the columns, then full-precision rows.
void write_weyl(const std::filesystem::path& file, const WeylData& data,
                const std::string& config_hash);
WeylData read_weyl(const std::filesystem::path& file);

void write_potential(const std::filesystem::path& file, const PotentialField& pot,
                     const std::string& config_hash);
PotentialField read_potential(const std::filesystem::path& file);

void write_columns(const std::filesystem::path& file, const Phi2Field& columns,
                   const std::string& config_hash);

void write_weyl_set(const std::filesystem::path& file, const WeylSetData& ws,
                    const std::string& config_hash);
WeylSetData read_weyl_set(const std::filesystem::path& file);

void write_boundary(const std::filesystem::path& file, const sg::BoundaryData& data,
                    const std::string& config_hash);
sg::BoundaryData read_boundary(const std::filesystem::path& file);

void write_cos_omega(const std::filesystem::path& file, const GridSpec& grid,
                     const Eigen::VectorXd& values, const std::string& config_hash);

// flat key=value document
void write_diagnostics(const std::filesystem::path& file,
                       const std::map<std::string, std::string>& items,
                       const std::string& config_hash);

std::string format_full(double v);

}  // namespace ratweyl::io
