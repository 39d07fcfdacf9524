#include "cngcf/rng.hpp"

#include <cmath>
#include <numbers>

#include "cngcf/error.hpp"

namespace cngcf {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::string_view parent, std::string_view label,
                       std::uint64_t index) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, &seed, sizeof(seed));
    h = fnv1a(h, parent.data(), parent.size());
    h = fnv1a(h, label.data(), label.size());
    h = fnv1a(h, &index, sizeof(index));
    return h;
}

}  // namespace

RngStream::RngStream(std::string name, std::uint64_t seed)
    : name_(std::move(name)), seed_(seed), engine_(seed) {}

std::uint64_t RngStream::next_raw() {
    ++draws_;
    return engine_();
}

double RngStream::uniform01() {
    // 53-bit mantissa construction; upper bits of mt19937_64 output.
    return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    if (!(lo <= hi)) throw InvalidInputError("uniform: lo > hi");
    return lo + (hi - lo) * uniform01();
}

double RngStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; 1 - u keeps the argument of log strictly positive.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

double RngStream::normal(double mean, double stddev) {
    if (stddev < 0.0) throw InvalidInputError("normal: negative stddev");
    return mean + stddev * normal();
}

bool RngStream::bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw InvalidInputError("bernoulli: p outside [0,1]");
    return uniform01() < p;
}

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
    if (n == 0) throw InvalidInputError("uniform_int: n must be positive");
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t raw = next_raw();
    while (raw >= limit) raw = next_raw();
    return raw % n;
}

RngStream RngStream::derive(std::string_view label, std::uint64_t index) const {
    std::string child_name = name_;
    child_name += '/';
    child_name += label;
    if (index != 0) {
        child_name += '.';
        child_name += std::to_string(index);
    }
    return RngStream(std::move(child_name), mix_seed(seed_, name_, label, index));
}

}  // namespace cngcf
