#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tsa {

enum class ErrorKind {
  MissingFile,
  SchemaError,
  DuplicateId,
  ZeroOrNegativeReactance,
  NoSlack,
  MultipleSlack,
  DisconnectedGraph,
  UnknownBus,
  NotALoadBus,
  BadMultiplier,
  InfeasibleDemand,
  NonConvergence,
  SingularJacobian,
  SingularBlock,
  DimensionMismatch,
  EmptySampleSet,
  AllWeightsZero,
  EmptySubset,
  TooFewSamples,
  BadArgument,
  IoError,
  ConfigError,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::SchemaError: return "schema error";
    case ErrorKind::DuplicateId: return "duplicate id";
    case ErrorKind::ZeroOrNegativeReactance: return "zero or negative reactance";
    case ErrorKind::NoSlack: return "no slack bus";
    case ErrorKind::MultipleSlack: return "multiple slack buses";
    case ErrorKind::DisconnectedGraph: return "disconnected graph";
    case ErrorKind::UnknownBus: return "unknown bus";
    case ErrorKind::NotALoadBus: return "not a load bus";
    case ErrorKind::BadMultiplier: return "non-positive multiplier";
    case ErrorKind::InfeasibleDemand: return "infeasible demand";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::SingularJacobian: return "singular jacobian";
    case ErrorKind::SingularBlock: return "singular eliminated block";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::EmptySampleSet: return "empty sample set";
    case ErrorKind::AllWeightsZero: return "all weights zero";
    case ErrorKind::EmptySubset: return "empty machine subset";
    case ErrorKind::TooFewSamples: return "too few samples";
    case ErrorKind::BadArgument: return "bad argument";
    case ErrorKind::IoError: return "i/o error";
    case ErrorKind::ConfigError: return "config error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

// Shortest decimal form that parses back to the identical double. Used for
// every persisted number so datasets and reports are byte-stable.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  double back = std::strtod(buf, nullptr);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char s[40];
      std::snprintf(s, sizeof s, "%.*g", prec, v);
      if (std::strtod(s, nullptr) == v) return s;
    }
  }
  return buf;
}

inline std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(s.substr(start)));
      break;
    }
    out.push_back(trim(s.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::SchemaError, "bad number '" + s + "' in " + context);
  return v;
}

inline long long parse_int(const std::string& s, const std::string& context) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') fail(ErrorKind::SchemaError, "bad integer '" + s + "' in " + context);
  return v;
}

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  out << content;
  if (!out) fail(ErrorKind::IoError, "short write to " + path);
}

// Runs fn(i) for i in [0, n) on `workers` threads. Tasks write only to their
// own output slot, so results are identical for any worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned nthreads = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nthreads);
  pool.reserve(nthreads);
  for (unsigned t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= n) break;
          fn(i);
        }
      } catch (...) {
        errors[t] = std::current_exception();
        next.store(n);
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace tsa
