#pragma once

#include "cqap/database.hpp"
#include "cqap/query.hpp"
#include "cqap/relation.hpp"

#include <cstdint>
#include <vector>

namespace cqap {

// One table per relation name with `rows` distinct tuples over values v0..v{d-1},
// d = max(10, 3*sqrt(rows)); value i is drawn as floor(d * u^skew).
Database random_database(const Cqap& q, std::size_t rows, std::uint64_t seed, double skew = 2.0);

// `count` single-tuple requests over A. About `hit_fraction` of them are
// projections of sampled body tuples; the rest draw each value from the
// active domain of its variable.
std::vector<Relation> random_requests(const Cqap& q, const std::vector<Relation>& atoms, std::size_t count,
                                      std::uint64_t seed, double hit_fraction = 0.5);

// Union of `size` requests drawn as above.
Relation random_batch(const Cqap& q, const std::vector<Relation>& atoms, std::size_t size, std::uint64_t seed);

}  // namespace cqap
