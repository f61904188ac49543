#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "degfrac/spectral.hpp"

// Configuration ingestion and the subcommands of the degfrac tool. Each command
// returns its process exit code: 0 success, 2 configuration or usage error,
// 3 numerical failure or failed check.
namespace degfrac::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

struct GridConfig {
    std::size_t ny = 1000;
    std::size_t nx = 128;
    double r = 0.0; ///< 0 selects the default 2/alpha
    double x_max = 1.0;
};

struct RunConfig {
    double alpha = 0.5;
    double beta = 0.0;
    int s = 1;
    std::string K = "1";
    std::vector<std::string> p{"0"};
    std::string phi = "0";
    GridConfig grid;
    std::size_t modes = 50;
    double tolerance = 1e-6;
    std::string output = ".";

    /// Parses JSON text; throws ConfigError naming the offending key.
    static RunConfig parse(const std::string& json_text);
    static RunConfig load(const std::string& path);

    /// Builds the problem (parses expressions, estimates the degeneracy exponent).
    spectral::ProblemSpec problem() const;
    double grading() const { return grid.r > 0.0 ? grid.r : 2.0 / alpha; }
};

/// Writes to a temporary file next to `path`, then renames it into place.
void write_atomic(const std::string& path, const std::string& content);

int cmd_solve(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_eigs(const std::string& config_path, std::optional<std::size_t> modes, std::ostream& out, std::ostream& err);
int cmd_ks(double alpha, double m, double l, double z, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_selftest(std::ostream& out, std::ostream& err);

} // namespace degfrac::cli
