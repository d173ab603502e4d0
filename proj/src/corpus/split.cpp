#include "ielts/corpus/split.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"

namespace ielts::corpus {

void SplitSpec::validate() const {
    for (double f : {train_frac, val_frac, test_frac}) {
        if (!std::isfinite(f) || f <= 0.0) throw InvalidInput("split fractions must be positive");
    }
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
        throw InvalidInput("split fractions must sum to 1");
    }
}

DatasetSplit split_dataset(const std::vector<EssayRecord>& records, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = records.size();
    if (n < 10) throw InvalidInput("at least 10 records are required to split a dataset");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    fisher_yates(order, rng);

    const auto n_train = static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val_frac * static_cast<double>(n))));

    DatasetSplit out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = records[order[i]];
        if (i < n_train) {
            out.train.push_back(rec);
        } else if (i < n_train + n_val) {
            out.val.push_back(rec);
        } else {
            out.test.push_back(rec);
        }
    }
    return out;
}

}  // namespace ielts::corpus
