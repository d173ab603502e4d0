#pragma once

#include <cstdint>
#include <vector>

#include "ielts/corpus/essay.hpp"

namespace ielts::corpus {

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 0;

    // Throws InvalidInput unless all fractions are positive and sum to 1.
    void validate() const;
};

struct DatasetSplit {
    std::vector<EssayRecord> train;
    std::vector<EssayRecord> val;
    std::vector<EssayRecord> test;
};

// Seeded Fisher-Yates shuffle followed by contiguous slicing. Train and
// validation sizes are round(frac * N); the test split takes the remainder.
// Requires at least 10 records.
DatasetSplit split_dataset(const std::vector<EssayRecord>& records, const SplitSpec& spec);

}  // namespace ielts::corpus
