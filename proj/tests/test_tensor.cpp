#include <gtest/gtest.h>

#include "har/core/checkpoint.hpp"
#include "har/core/random.hpp"
#include "har/core/tensor.hpp"

#include <filesystem>

using namespace har;

TEST(Tensor, ShapeAndSizeAgree) {
    TensorF t({2, 3, 4});
    EXPECT_EQ(t.size(), 24);
    EXPECT_EQ(shape_numel(t.shape()), t.size());
    t.at(1, 2, 3) = 5.0f;
    EXPECT_FLOAT_EQ(t[23], 5.0f);
}

TEST(Tensor, RejectsNonPositiveDims) {
    EXPECT_THROW(TensorF({2, 0, 3}), Error);
    EXPECT_THROW(TensorF({-1}), Error);
}

TEST(Tensor, RejectsMismatchedData) {
    EXPECT_THROW(TensorF({2, 2}, std::vector<float>{1.0f, 2.0f, 3.0f}), Error);
}

TEST(Tensor, FiniteCheck) {
    TensorF t({3}, std::vector<float>{1.0f, 2.0f, 3.0f});
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<float>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
}

TEST(Rng, DeterministicStreams) {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double va = a.normal();
        EXPECT_EQ(va, b.normal());
        (void)c.normal();
    }
    Rng a2(42), c2(43);
    bool differs = false;
    for (int i = 0; i < 10; ++i)
        if (a2.normal() != c2.normal()) differs = true;
    EXPECT_TRUE(differs);
}

TEST(Rng, NormalMomentsRoughlyStandard) {
    Rng rng(7);
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sum2 += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.05);
    EXPECT_NEAR(sum2 / n, 1.0, 0.05);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    Rng rng(11);
    TensorF a({3, 4});
    TensorF b({7});
    rng.fill_normal(a);
    rng.fill_uniform(b, -2.0, 2.0);
    b[0] = 1.0f / 3.0f;  // value without short decimal representation

    const auto dir = std::filesystem::temp_directory_path() / "har_ckpt_test";
    std::filesystem::remove_all(dir);
    NamedTensors tensors = {{"a", &a}, {"b", &b}};
    save_checkpoint(dir, tensors, "cfg123");

    TensorF a2({3, 4}), b2({7});
    NamedTensors loaded = {{"a", &a2}, {"b", &b2}};
    EXPECT_EQ(load_checkpoint(dir, loaded), "cfg123");
    for (int64_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], a2[i]);
    for (int64_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i], b2[i]);

    TensorF wrong({4, 3});
    NamedTensors bad = {{"a", &wrong}, {"b", &b2}};
    EXPECT_THROW(load_checkpoint(dir, bad), Error);
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, ConfigHashIsStable) {
    EXPECT_EQ(hash_hex("abc"), hash_hex("abc"));
    EXPECT_NE(hash_hex("abc"), hash_hex("abd"));
    EXPECT_EQ(hash_hex("abc").size(), 16u);
}
