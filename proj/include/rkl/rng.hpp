#pragma once

#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>

namespace rkl {

/// Boost's engines and distributions produce the same stream on every
/// platform, unlike the std:: distributions.
using Engine = boost::random::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Hashes a master seed and a path of indices (trial, chunk, ...) into an
/// independent seed. Order of the path matters.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

Engine substream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

} // namespace rkl
