#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace rdc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rdc-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

double distance_to_arc(const Arc& a, double x, double y) {
    double theta = std::atan2(y - a.cy, x - a.cx);
    while (theta < a.theta0) theta += 2.0 * std::numbers::pi;
    while (theta > a.theta0 + 2.0 * std::numbers::pi) theta -= 2.0 * std::numbers::pi;
    if (theta <= a.theta1) return std::abs(std::hypot(x - a.cx, y - a.cy) - a.radius);
    double best = 1e300;
    for (double t : {a.theta0, a.theta1}) {
        const auto p = a.at(t);
        best = std::min(best, std::hypot(x - p[0], y - p[1]));
    }
    return best;
}

}  // namespace

TEST(ZScore, TwoPointColumn) {
    Matrix X(2, 1);
    X << 1, 3;
    const auto z = zscore_normalize(X);
    EXPECT_EQ(z.mean[0], 2.0);
    EXPECT_EQ(z.stddev[0], 1.0);
    EXPECT_EQ(z.X(0, 0), -1.0);
    EXPECT_EQ(z.X(1, 0), 1.0);
}

TEST(ZScore, IdempotentAndStandardizes) {
    Engine rng = stream(1, "test");
    Matrix X = rdc::test::random_matrix(500, 6, rng, 3.0);
    X.col(2).array() += 7.0;
    const auto z = zscore_normalize(X);
    for (Eigen::Index j = 0; j < 6; ++j) {
        const double mu = z.X.col(j).mean();
        const double var = (z.X.col(j).array() - mu).square().mean();
        EXPECT_NEAR(mu, 0.0, 1e-10);
        EXPECT_NEAR(var, 1.0, 1e-10);
    }
    EXPECT_LT((zscore_normalize(z.X).X - z.X).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ZScore, ConstantColumnUnchanged) {
    Matrix X(3, 2);
    X << 1, 5, 2, 5, 3, 5;
    const auto z = zscore_normalize(X);
    EXPECT_EQ(z.X.col(1), X.col(1));
    EXPECT_EQ(z.stddev[1], 1.0);
}

TEST(Noise, ZeroSigmaIsIdentity) {
    Engine rng = stream(2, "test");
    const Matrix X = rdc::test::random_matrix(20, 3, rng);
    EXPECT_EQ(add_gaussian_noise(X, NoiseSpec{0.0, 5}), X);
    EXPECT_EQ(add_gaussian_noise(zscore_normalize(X).X, NoiseSpec{0.0, 5}), zscore_normalize(X).X);
}

TEST(Noise, VarianceAndDeterminism) {
    const Matrix X = Matrix::Zero(1000, 1000);
    const Matrix a = add_gaussian_noise(X, NoiseSpec{0.25, 9});
    const double mean = a.mean();
    const double var = (a.array() - mean).square().sum() / static_cast<double>(a.size() - 1);
    EXPECT_NEAR(var, 0.0625, 0.02 * 0.0625);
    EXPECT_EQ(add_gaussian_noise(X.topRows(10), NoiseSpec{0.25, 9}), add_gaussian_noise(X.topRows(10), NoiseSpec{0.25, 9}));
    EXPECT_THROW(add_gaussian_noise(X, NoiseSpec{-1.0, 0}), std::invalid_argument);
}

TEST(Augment, ZeroDrawIsIdentity) {
    Engine rng = stream(3, "test");
    const GridShape g{5, 4, 2};
    const RowVector img = rdc::test::random_matrix(1, 40, rng);
    EXPECT_EQ(transform_image(img, g, AugmentDraw{}), img);
}

TEST(Augment, ZeroImageStaysZero) {
    Engine rng = stream(4, "test");
    const GridShape g{6, 6, 1};
    const Matrix out = augment(Matrix::Zero(8, 36), g, rng);
    EXPECT_EQ(out.rows(), 8);
    EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Augment, IntegerShiftMovesPixel) {
    const GridShape g{7, 9, 1};
    RowVector img = RowVector::Zero(63);
    img[2 * 9 + 3] = 1.0;  // (y=2, x=3)
    const RowVector out = transform_image(img, g, AugmentDraw{2.0, 4.0, 0.0});
    EXPECT_EQ(out[4 * 9 + 7], 1.0);  // (y=4, x=7)
    EXPECT_EQ(out.sum(), 1.0);
}

TEST(Augment, WithoutGridPassesThrough) {
    Engine rng = stream(5, "test");
    const Matrix b = rdc::test::random_matrix(3, 4, rng);
    EXPECT_EQ(augment(b, std::nullopt, rng), b);
}

TEST(Synthetic, NoiselessPointsLieOnArcs) {
    const Dataset ds = gen_curved_clusters(100, 0.0, 3);
    const auto arcs = curved_cluster_arcs();
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        const Arc& a = arcs[static_cast<std::size_t>((*ds.labels)[static_cast<std::size_t>(i)])];
        EXPECT_LT(std::abs(std::hypot(ds.X(i, 0) - a.cx, ds.X(i, 1) - a.cy) - a.radius), 1e-12);
    }
}

TEST(Synthetic, BalancedAndDeterministic) {
    const Dataset ds = gen_curved_clusters(37, 0.05, 4);
    EXPECT_EQ(ds.X.rows(), 148);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(std::count(ds.labels->begin(), ds.labels->end(), k), 37);
    EXPECT_EQ(gen_curved_clusters(37, 0.05, 4).X, ds.X);
    EXPECT_NE(gen_curved_clusters(37, 0.05, 5).X, ds.X);
    EXPECT_THROW(gen_curved_clusters(0, 0.05, 1), std::invalid_argument);
}

TEST(Synthetic, NearestArcAgreesWithLabel) {
    const Dataset ds = gen_curved_clusters(500, 0.05, 6);
    const auto arcs = curved_cluster_arcs();
    std::size_t agree = 0;
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        int best = 0;
        double bd = 1e300;
        for (int k = 0; k < 4; ++k) {
            const double d = distance_to_arc(arcs[static_cast<std::size_t>(k)], ds.X(i, 0), ds.X(i, 1));
            if (d < bd) {
                bd = d;
                best = k;
            }
        }
        agree += best == (*ds.labels)[static_cast<std::size_t>(i)];
    }
    EXPECT_GE(static_cast<double>(agree) / 2000.0, 0.99);
}

TEST(Csv, PlainAndLabelled) {
    const fs::path dir = temp_dir("csv");
    {
        std::ofstream(dir / "a.csv") << "1,2\n3,4\n";
        const Dataset d = load_csv(dir / "a.csv", false);
        Matrix expect(2, 2);
        expect << 1, 2, 3, 4;
        EXPECT_EQ(d.X, expect);
        EXPECT_FALSE(d.labels.has_value());
    }
    {
        std::ofstream(dir / "b.csv") << "x,y,label\n1,2,0\n3,4,1\n";
        const Dataset d = load_csv(dir / "b.csv", true);
        EXPECT_EQ(d.X.cols(), 2);
        EXPECT_EQ(*d.labels, (std::vector<int>{0, 1}));
    }
    std::ofstream(dir / "c.csv") << "1,2\n3\n";
    EXPECT_THROW(load_csv(dir / "c.csv", false), FormatError);
    std::ofstream(dir / "d.csv") << "1,2\n3,zz\n";
    EXPECT_THROW(load_csv(dir / "d.csv", false), FormatError);
}

TEST(Csv, RoundTripAtPrintedPrecision) {
    const fs::path dir = temp_dir("csv-rt");
    Engine rng = stream(7, "test");
    Dataset d;
    d.X = rdc::test::random_matrix(15, 3, rng);
    d.labels = std::vector<int>(15, 2);
    save_csv(d, dir / "r.csv", true);
    const Dataset back = load_dataset(dir / "r.csv", DataFormat::Csv, true);
    EXPECT_EQ(back.X, d.X);
    EXPECT_EQ(back.labels, d.labels);
}

TEST(Raw, RoundTripIsBitExact) {
    const fs::path dir = temp_dir("raw");
    Engine rng = stream(8, "test");
    Dataset d;
    d.name = "random";
    d.X = rdc::test::random_matrix(33, 7, rng);
    d.X(0, 0) = -0.0;
    d.X(1, 1) = std::numeric_limits<double>::denorm_min();
    d.labels = std::vector<int>(33, 1);
    d.grid = GridShape{7, 1, 1};
    save_raw(d, dir / "r.f64");
    const Dataset back = load_dataset(dir / "r.f64", guess_format(dir / "r.f64"));
    EXPECT_EQ(std::memcmp(back.X.data(), d.X.data(), sizeof(double) * 33 * 7), 0);
    EXPECT_EQ(back.labels, d.labels);
    ASSERT_TRUE(back.grid.has_value());
    EXPECT_EQ(back.grid->height, 7u);
    EXPECT_EQ(back.name, "random");
}

TEST(Raw, SizeMismatchIsRejected) {
    const fs::path dir = temp_dir("raw-bad");
    Dataset d;
    d.X = Matrix::Ones(4, 2);
    save_raw(d, dir / "r.f64");
    fs::resize_file(dir / "r.f64", 8 * 7);
    EXPECT_THROW(load_raw(dir / "r.f64"), FormatError);
    EXPECT_THROW(load_dataset(dir / "missing.f64", DataFormat::RawF64), std::exception);
}

TEST(Format, Names) {
    EXPECT_EQ(data_format_from_string("csv"), DataFormat::Csv);
    EXPECT_EQ(data_format_from_string("raw-f64"), DataFormat::RawF64);
    EXPECT_THROW(data_format_from_string("parquet"), std::invalid_argument);
    EXPECT_EQ(guess_format("x.csv"), DataFormat::Csv);
}
