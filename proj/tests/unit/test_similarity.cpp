#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "metabo/sim_blackbox.hpp"
#include "metabo/similarity.hpp"
#include "oracles.hpp"

using namespace metabo;

namespace {

double l1(const ShapeDescriptor& a, const ShapeDescriptor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.histogram.size(); ++i) s += std::abs(a.histogram[i] - b.histogram[i]);
    return s;
}

PointCloud rotate(const PointCloud& c, double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    PointCloud out;
    for (const auto& p : c) out.push_back({ca * p[0] - sa * p[1], sa * p[0] + ca * p[1], p[2]});
    return out;
}

PointCloud scaled(const PointCloud& c, double s) {
    PointCloud out;
    for (const auto& p : c) out.push_back({s * p[0], s * p[1], s * p[2]});
    return out;
}

}  // namespace

TEST(Descriptor, IdenticalCloudsGiveIdenticalDescriptors) {
    const auto c = sim::make_cloud(sim::ShapeFamily::torus, 3);
    const auto a = descriptor(c), b = descriptor(c);
    EXPECT_EQ(a.histogram, b.histogram);
    EXPECT_EQ(a.normalization, b.normalization);
}

TEST(Descriptor, RotationAndScaleInvariance) {
    const auto c = sim::make_cloud(sim::ShapeFamily::cube, 4);
    const auto d = descriptor(c);
    EXPECT_LE(l1(d, descriptor(rotate(c, 0.7))), 0.05);
    EXPECT_LE(l1(d, descriptor(scaled(c, 2.5))), 0.05);
}

TEST(Descriptor, IsADistribution) {
    const auto d = descriptor(sim::make_cloud(sim::ShapeFamily::rod, 5));
    ASSERT_EQ(d.histogram.size(), 64u);
    double s = 0.0;
    for (double h : d.histogram) {
        EXPECT_GE(h, 0.0);
        s += h;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Descriptor, PermutationInvariant) {
    auto c = sim::make_cloud(sim::ShapeFamily::disk, 6, 500);
    const auto d = descriptor(c);
    std::mt19937_64 rng(1);
    std::shuffle(c.begin(), c.end(), rng);
    EXPECT_EQ(descriptor(c).histogram, d.histogram);
}

TEST(Descriptor, Preconditions) {
    EXPECT_THROW(descriptor(PointCloud{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), Error);
    EXPECT_THROW(descriptor(PointCloud(10, Point3{1, 2, 3})), Error);
}

TEST(DescriptorDistance, MetricProperties) {
    std::vector<ShapeDescriptor> ds;
    for (std::uint64_t s = 0; s < 12; ++s) {
        DescriptorConfig cfg;
        cfg.pair_samples = 5000;
        ds.push_back(descriptor(sim::make_cloud(sim::kShapeFamilies[s % 7], s, 300), cfg));
    }
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto& a = ds[rng() % ds.size()];
        const auto& b = ds[rng() % ds.size()];
        const auto& c = ds[rng() % ds.size()];
        EXPECT_EQ(descriptor_distance(a, a), 0.0);
        EXPECT_EQ(descriptor_distance(a, b), descriptor_distance(b, a));
        EXPECT_LE(descriptor_distance(a, c), descriptor_distance(a, b) + descriptor_distance(b, c) + 1e-15);
    }
    ShapeDescriptor short_one{{1.0}, 1.0};
    EXPECT_THROW(descriptor_distance(ds[0], short_one), Error);
}

class SimilarityStore : public ::testing::Test {
protected:
    void SetUp() override { dir_ = oracle::temp_dir(::testing::UnitTest::GetInstance()->current_test_info()->name()); }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::filesystem::path dir_;
};

TEST_F(SimilarityStore, EmptyStoreIsNotFound) {
    MemoryStore store(dir_);
    EXPECT_THROW(most_similar(sim::make_cloud(sim::ShapeFamily::cube, 1), store), NotFound);
}

TEST_F(SimilarityStore, SingleEntryAlwaysWins) {
    MemoryStore store(dir_);
    store.store_cloud({"A", sim::make_cloud(sim::ShapeFamily::sphere, 1)});
    EXPECT_EQ(most_similar(sim::make_cloud(sim::ShapeFamily::rod, 2), store).task, "A");
}

TEST_F(SimilarityStore, FindsTheMatchingFamily) {
    MemoryStore store(dir_);
    store.store_cloud({"cube", sim::make_cloud(sim::ShapeFamily::cube, 10)});
    store.store_cloud({"sphere", sim::make_cloud(sim::ShapeFamily::sphere, 11)});
    store.store_cloud({"rod", sim::make_cloud(sim::ShapeFamily::rod, 12)});
    const auto query = scaled(rotate(sim::make_cloud(sim::ShapeFamily::cube, 99), 1.1), 1.7);
    const auto m = most_similar(query, store);
    EXPECT_EQ(m.task, "cube");
    // Agrees with direct computation.
    const auto dq = descriptor(query);
    double best = INFINITY;
    std::string arg;
    for (const auto& t : store.list_tasks()) {
        const double d = descriptor_distance(dq, descriptor(store.load_cloud(t).cloud));
        if (d < best) best = d, arg = t;
    }
    EXPECT_EQ(m.task, arg);
    EXPECT_EQ(m.distance, best);
}

TEST_F(SimilarityStore, StoredCloudMatchesItself) {
    MemoryStore store(dir_);
    const auto c = sim::make_cloud(sim::ShapeFamily::cone, 5);
    store.store_cloud({"cone", c});
    store.store_cloud({"torus", sim::make_cloud(sim::ShapeFamily::torus, 6)});
    const auto m = most_similar(c, store);
    EXPECT_EQ(m.task, "cone");
    EXPECT_LE(m.distance, 0.05);
}

TEST_F(SimilarityStore, TiesGoToSmallerLabel) {
    MemoryStore store(dir_);
    const auto c = sim::make_cloud(sim::ShapeFamily::cube, 5);
    store.store_cloud({"zeta", c});
    store.store_cloud({"alpha", c});
    EXPECT_EQ(most_similar(sim::make_cloud(sim::ShapeFamily::sphere, 1), store).task, "alpha");
}
