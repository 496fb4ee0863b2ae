#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace ragcal {

using json = nlohmann::json;

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// Digest of a JSON value in canonical form (sorted keys, compact dump).
std::string json_digest(const json& value);

/// Derives a per-purpose seed from one top-level seed, so every module draws
/// from an independent stream that is still replayable from the top seed.
std::uint64_t derive_seed(std::uint64_t top_seed, std::string_view purpose);

/// Deterministic RNG. Wraps mt19937_64 (whose output sequence is fixed by the
/// standard) with its own bounded-integer and real draws, so sampled
/// sequences do not depend on the standard library's distribution code.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);
    /// Uniform real in [0, 1).
    double uniform_real();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Draws `k` distinct indices from [0, n) in sampled order (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);

/// Replaces every `{name}` with vars[name]. Unknown placeholders are left as-is.
std::string render_template(std::string_view tpl, const std::map<std::string, std::string>& vars);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temp file and renames, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& rows);

/// Fixed-precision decimal rendering used in CSV and markdown tables.
std::string format_fixed(double value, int decimals);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
/// written by index; if any call throws, the exception from the lowest index
/// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace ragcal
