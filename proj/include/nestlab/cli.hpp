#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nestlab/config.hpp"
#include "nestlab/stats.hpp"

namespace nestlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// A parsed command line. Options hold the text given for each long flag
/// (without dashes); flags are the valueless switches that were set.
struct Invocation {
    std::string subcommand;
    std::map<std::string, std::string> options;
    std::set<std::string> flags;

    bool operator==(const Invocation&) const = default;
};

/// Thrown for anything that makes the command line unusable (exit 2).
class UsageError : public Error {
  public:
    explicit UsageError(const std::string& what) : Error(ErrorCode::InvalidArgument, what) {}
};

std::vector<std::string> subcommands();

/// Grammar check only: unknown flags, missing values and missing required
/// flags throw UsageError. Values are interpreted by run().
Invocation parse(const std::vector<std::string>& args);
/// Arguments that parse back to the same invocation.
std::vector<std::string> render(const Invocation& inv);

/// Exit code; data goes to out (only on success), diagnostics to err.
/// env_bits is the value of NESTLAB_BITS, or nullptr.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const char* env_bits = nullptr);

/// gamma, b, b_tilde, a, a_tilde, n0, sparse_factor, sparse_base.
stats::ClassifierConstants constants_from(const config::KeyValues& kv);
config::KeyValues constants_to_key_values(const stats::ClassifierConstants& c);

/// Version line followed by every algorithm-affecting default as key = value.
std::string version_text();

} // namespace nestlab::cli
