#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlsm/estimate.hpp"
#include "mlsm/family.hpp"
#include "mlsm/inference.hpp"
#include "mlsm/simgen.hpp"
#include "mlsm/tensor.hpp"

namespace mlsm::io {

inline constexpr char kMagic[] = "MLSM1";
inline constexpr std::uint8_t kFormatVersion = 1;

enum class TensorFormat { Binary, Triples, Auto };
enum class ValueKind : std::uint8_t { Real = 0, Count = 1, Binary = 2 };

TensorFormat parse_tensor_format(const std::string& name);
ValueKind value_kind_for(FamilyKind kind);

// Binary layout (little endian): "MLSM1", u8 version, u8 'B', u8 value kind,
// u64 d1, u64 d2, u64 d3, then d1*d2*d3 float64 in mode-1 storage order.
// Triples layout: header line "MLSM1 triples d1 d2 d3 kind", then "i,j,t,value"
// lines with 1-based indices; unlisted entries are 0.
void write_tensor(const std::filesystem::path& path, const Tensor3& x, TensorFormat format,
                  ValueKind kind = ValueKind::Real);
Tensor3 read_tensor(const std::filesystem::path& path, TensorFormat format = TensorFormat::Auto);

/// CSV with a header row; values printed with round-trip precision.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header);
Matrix read_matrix_csv(const std::filesystem::path& path);

void write_core_csv(const std::filesystem::path& path, const Tensor3& core);

// Fit bundle: fit.json plus u1/v1/u2/v2 factor CSVs and theta/phi/core tables.
void write_fit(const std::filesystem::path& dir, const FitResult& fit, const FamilySpec& family,
               const FitConfig& cfg);
FitResult read_fit(const std::filesystem::path& dir);

void write_params(const std::filesystem::path& dir, const ModelParams& p);

void write_coverage(const std::filesystem::path& dir, const CoverageReport& report);

// Command-line run configuration (JSON file and/or flags).
struct RunConfig {
    FamilySpec family{};
    FitConfig fit{};
    SimConfig sim{};
    std::uint64_t seed = 1;
    int threads = 1;
    double level = 0.95;
    double alpha = 0.05;
    Index reps = 200;

    /// Validates the family, the rank identities d_m = k_m + k_deg + 1 and the levels.
    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const FamilySpec& f);
FamilySpec family_from_json(const nlohmann::json& j);

}  // namespace mlsm::io
