#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "ielts/common/error.hpp"
#include "ielts/corpus/band.hpp"
#include "ielts/corpus/csv.hpp"
#include "ielts/corpus/dataset.hpp"
#include "ielts/corpus/split.hpp"
#include "test_util.hpp"

using namespace ielts;
using namespace ielts::corpus;

namespace {

std::vector<EssayRecord> make_records(std::size_t n) {
    std::vector<EssayRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"e" + std::to_string(i), "", "Essay number " + std::to_string(i) + ".", band_at(i % 17)});
    }
    return out;
}

std::vector<std::string> ids(const std::vector<EssayRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.id);
    return out;
}

}  // namespace

TEST_CASE("round_to_band examples") {
    CHECK(round_to_band(6.24).value() == 6.0);
    CHECK(round_to_band(6.25).value() == 6.5);
    CHECK(round_to_band(6.75).value() == 7.0);
    CHECK(round_to_band(9.7).value() == 9.0);
    CHECK(round_to_band(-3.0).value() == 1.0);
    CHECK(round_to_band(6.49).value() == 6.5);
    CHECK_THROWS_AS(round_to_band(std::nan("")), InvalidInput);
    CHECK_THROWS_AS(round_to_band(INFINITY), InvalidInput);
}

TEST_CASE("round_to_band is idempotent and nearest on a fine grid") {
    for (int i = 0; i <= 1000; ++i) {
        const double x = i * 0.01;
        const double b = round_to_band(x).value();
        CHECK(round_to_band(b).value() == b);
        const double c = std::clamp(x, 1.0, 9.0);
        for (int k = 0; k < kBandCount; ++k) {
            const double other = band_at(k).value();
            CHECK(std::abs(c - b) <= std::abs(c - other) + 1e-12);
        }
    }
}

TEST_CASE("Band lattice") {
    CHECK(Band::from_lattice(6.5).index() == 11);
    CHECK(band_at(0).value() == 1.0);
    CHECK(band_at(16).value() == 9.0);
    CHECK_THROWS_AS(Band::from_lattice(6.3), InvalidInput);
    CHECK_THROWS_AS(Band::from_lattice(9.5), InvalidInput);
    CHECK_THROWS_AS(band_at(17), InvalidInput);
}

TEST_CASE("csv parsing handles quotes, newlines and BOM") {
    const auto rows = parse_csv("\xEF\xBB\xBFid,essay\n1,\"a, \"\"quoted\"\"\nline\"\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].fields[0] == "id");
    CHECK(rows[1].fields[1] == "a, \"quoted\"\nline");
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
}

TEST_CASE("load_dataset csv") {
    test_util::TempDir dir;
    const auto p = dir.write("d.csv", "id,prompt,essay,band\n"
                                      "a,Q,\"The cat sat.\",6.5\n"
                                      ",Q,Another essay here.,\n"
                                      "c,,Third one.,7.25\n");
    const auto recs = load_dataset(p);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].id == "a");
    CHECK(recs[0].label->value() == 6.5);
    CHECK(recs[1].id == "row-2");
    CHECK_FALSE(recs[1].label.has_value());
    CHECK(recs[2].label->value() == 7.5);
}

TEST_CASE("load_dataset jsonl and aliases") {
    test_util::TempDir dir;
    const auto p = dir.write("d.jsonl", "{\"Essay\": \"One two three.\", \"band\": 6}\n"
                                        "\n"
                                        "{\"id\": \"x\", \"text\": \"Four five.\", \"overall\": \"5.5\"}\n");
    const auto recs = load_dataset(p);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].id == "row-1");
    CHECK(recs[0].label->value() == 6.0);
    CHECK(recs[1].id == "x");
    CHECK(recs[1].label->value() == 5.5);
}

TEST_CASE("load_dataset errors name the row") {
    test_util::TempDir dir;
    SUBCASE("band out of range") {
        const auto p = dir.write("d.csv", "essay,band\nok text.,6\ntext,9.5\n");
        try {
            load_dataset(p);
            FAIL("expected error");
        } catch (const DatasetError& e) {
            CHECK(e.row() == 2);
            CHECK(std::string(e.what()).find("band out of range") != std::string::npos);
        }
    }
    SUBCASE("empty essay") {
        const auto p = dir.write("d.csv", "essay,band\n\"\",6.0\n");
        try {
            load_dataset(p);
            FAIL("expected error");
        } catch (const DatasetError& e) {
            CHECK(e.row() == 1);
            CHECK(std::string(e.what()).find("empty essay") != std::string::npos);
        }
    }
    SUBCASE("malformed row") {
        const auto p = dir.write("d.csv", "id,essay\na,b,c\n");
        CHECK_THROWS_AS(load_dataset(p), DatasetError);
    }
    SUBCASE("validate collects every error") {
        const auto p = dir.write("d.csv", "essay,band\n\"\",6\nfine.,10\nfine again.,5\n");
        const auto errs = validate_dataset(p, DatasetFormat::csv);
        REQUIRE(errs.size() == 2);
        CHECK(errs[0].row == 1);
        CHECK(errs[1].row == 2);
    }
    SUBCASE("duplicate id") {
        const auto p = dir.write("d.csv", "id,essay\na,x y.\na,z w.\n");
        CHECK_THROWS_AS(load_dataset(p), DatasetError);
    }
}

TEST_CASE("write then load round trip") {
    test_util::TempDir dir;
    auto recs = make_records(12);
    recs[3].body = "Has, commas and \"quotes\"\n\nand paragraphs.";
    recs[4].label.reset();
    const auto p = dir / "out.csv";
    write_dataset_csv(p, recs);
    const auto back = load_dataset(p);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].id == recs[i].id);
        CHECK(back[i].body == recs[i].body);
        CHECK(back[i].label == recs[i].label);
    }
}

TEST_CASE("split_dataset sizes") {
    SplitSpec spec;
    spec.seed = 7;
    auto s = split_dataset(make_records(100), spec);
    CHECK(s.train.size() == 70);
    CHECK(s.val.size() == 15);
    CHECK(s.test.size() == 15);
    s = split_dataset(make_records(1500), spec);
    CHECK(s.train.size() == 1050);
    CHECK(s.val.size() == 225);
    CHECK(s.test.size() == 225);
}

TEST_CASE("split_dataset is deterministic") {
    SplitSpec spec;
    spec.seed = 7;
    const auto recs = make_records(100);
    const auto a = split_dataset(recs, spec);
    const auto b = split_dataset(recs, spec);
    CHECK(ids(a.train) == ids(b.train));
    CHECK(ids(a.val) == ids(b.val));
    CHECK(ids(a.test) == ids(b.test));
    spec.seed = 8;
    const auto c = split_dataset(recs, spec);
    CHECK(ids(a.train) != ids(c.train));
}

TEST_CASE("split_dataset errors") {
    SplitSpec bad{0.7, 0.2, 0.2, 1};
    CHECK_THROWS_AS(split_dataset(make_records(20), bad), InvalidInput);
    CHECK_THROWS_AS(split_dataset(make_records(9), SplitSpec{}), InvalidInput);
    CHECK_THROWS_AS((SplitSpec{0.0, 0.5, 0.5, 1}).validate(), InvalidInput);
}

TEST_CASE("split_dataset partition property") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 10 + rng() % 300;
        const double a = 0.1 + 0.8 * (rng() % 1000) / 1000.0;
        const double b = (1.0 - a) * (0.1 + 0.8 * (rng() % 1000) / 1000.0);
        SplitSpec spec{a, b, 1.0 - a - b, rng()};
        const auto recs = make_records(n);
        const auto s = split_dataset(recs, spec);
        CHECK(s.train.size() + s.val.size() + s.test.size() == n);
        std::set<std::string> seen;
        for (const auto* part : {&s.train, &s.val, &s.test}) {
            for (const auto& r : *part) CHECK(seen.insert(r.id).second);
        }
        CHECK(seen.size() == n);
        CHECK(std::abs(static_cast<double>(s.train.size()) - a * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.val.size()) - b * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(s.test.size()) - spec.test_frac * n) <= 1.0);
    }
}
