#include <doctest.h>

#include <cmath>

#include <limits>

#include "daclr/encoder.hpp"
#include "daclr/errors.hpp"
#include "daclr/summarizer.hpp"
#include "daclr/trainer.hpp"

#include "helpers.hpp"

using namespace daclr;

TEST_CASE("featurize hashes tokens and bigrams into buckets") {
    CHECK(featurize("", 8).empty());
    CHECK(featurize("a b", 8) == featurize("a b", 8));

    // fnv1a64("a") % 8 = 4, fnv1a64("b") % 8 = 5, fnv1a64("a_b") % 8 = 1
    auto buckets = featurize("a b", 8);
    REQUIRE(buckets.size() == 3);
    CHECK(buckets[0] == std::pair<uint32_t, double>{1, 1.0});
    CHECK(buckets[1] == std::pair<uint32_t, double>{4, 1.0});
    CHECK(buckets[2] == std::pair<uint32_t, double>{5, 1.0});

    // repeated tokens accumulate counts
    auto repeated = featurize("a a", 16);
    bool found = false;
    for (auto [bucket, count] : repeated) {
        if (bucket == fnv1a64("a") % 16) {
            CHECK(count == 2.0);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("encode is unit norm and deterministic") {
    EncoderModel model = EncoderModel::init(256, 16, 3);
    for (const char* text : {"a", "alice met bob", "", "x y z w"}) {
        Embedding e = encode(model, text);
        double norm = 0;
        for (double v : e) norm += v * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
        CHECK(encode(model, text) == e);
    }
    // empty text maps to the fixed basis embedding
    Embedding empty = encode(model, "");
    CHECK(empty[0] == 1.0);
    for (size_t j = 1; j < empty.size(); ++j) CHECK(empty[j] == 0.0);
}

TEST_CASE("encode matches the hand evaluation on an identity projection") {
    // H=2, d=2, W=I: "a" hashes to bucket 0, so z=(1,0), tanh then normalize
    EncoderModel model;
    model.hash_dim = 2;
    model.embed_dim = 2;
    model.projection = {1.0, 0.0, 0.0, 1.0};
    model.head_weights = {0.0, 0.0};
    REQUIRE(fnv1a64("a") % 2 == 0);
    Embedding e = encode(model, "a");
    CHECK(e[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine of unit vectors is the dot product") {
    Embedding e1{1.0, 0.0}, e2{0.0, 1.0};
    CHECK(cosine(e1, e1) == 1.0);
    CHECK(cosine(e1, e2) == 0.0);
    CHECK(cosine({0.6, 0.8}, {0.8, 0.6}) == doctest::Approx(0.96).epsilon(1e-12));
}

TEST_CASE("cross_score is an affine head over the joint encoding") {
    EncoderModel model = EncoderModel::init(128, 8, 11);

    // zero weights: every pair scores the bias
    EncoderModel zero = model;
    std::fill(zero.head_weights.begin(), zero.head_weights.end(), 0.0);
    zero.head_bias = 0.25;
    CHECK(cross_score(zero, "a", "b") == 0.25);
    CHECK(cross_score(zero, "alice met bob", "bob met alice") == 0.25);

    CHECK(cross_score(model, "a b", "c d") == cross_score(model, "a b", "c d"));

    // hand affine evaluation against the joint embedding
    Embedding joint = encode(model, std::string("a b") + kSepToken + "c d");
    double expected = model.head_bias;
    for (uint32_t j = 0; j < model.embed_dim; ++j) expected += model.head_weights[j] * joint[j];
    CHECK(cross_score(model, "a b", "c d") == doctest::Approx(expected).epsilon(1e-15));
}

namespace {

EventSummary summary_of(const std::string& text) { return fallback_extract(text); }

// aggregate relative error between analytic and finite-difference gradients
double fd_relative_error(const EncoderModel& model, const std::vector<ContrastiveExample>& batch,
                         double tau, double beta, double eps = 1e-5) {
    GradientBuffer grads = GradientBuffer::zeros(model);
    batch_loss(model, batch, tau, beta, &grads);
    double num = 0.0, fd_norm = 0.0, an_norm = 0.0;
    for (size_t i = 0; i < model.projection.size(); ++i) {
        EncoderModel up = model, down = model;
        up.projection[i] += eps;
        down.projection[i] -= eps;
        double fd =
            (batch_loss(up, batch, tau, beta).total - batch_loss(down, batch, tau, beta).total) /
            (2 * eps);
        double diff = fd - grads.projection[i];
        num += diff * diff;
        fd_norm += fd * fd;
        an_norm += grads.projection[i] * grads.projection[i];
    }
    return std::sqrt(num) / std::max({std::sqrt(fd_norm), std::sqrt(an_norm), 1e-12});
}

} // namespace

TEST_CASE("analytic gradient matches central finite differences") {
    EventSummary c = summary_of("Alice met Bob in Paris on 1999");
    EventSummary p = summary_of("Bob met Alice in Paris on 1998");
    EventSummary n1 = summary_of("Alice saw Bob in Paris on 1999");
    EventSummary n2 = summary_of("Carol ran Dave in Rome on 1701");
    std::vector<ContrastiveExample> batch{{&c, &p, {&n1, &n2}}};

    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        EncoderModel model = EncoderModel::init(32, 4, seed);
        CHECK(fd_relative_error(model, batch, 0.05, 0.4) < 1e-4);
    }
}

TEST_CASE("gradient is zero where the loss is constant") {
    EventSummary c = summary_of("Alice met Bob");
    EventSummary p = summary_of("Bob met Alice");
    // no negatives: info_nce degenerates to 0 for every view
    std::vector<ContrastiveExample> batch{{&c, &p, {}}};
    EncoderModel model = EncoderModel::init(32, 4, 5);
    GradientBuffer grads = GradientBuffer::zeros(model);
    LossBreakdown losses = batch_loss(model, batch, 0.05, 0.5, &grads);
    CHECK(losses.total == 0.0);
    CHECK(grads.max_abs() == 0.0);
}

TEST_CASE("scaling the loss scales the gradient linearly") {
    EventSummary c = summary_of("Alice met Bob on 1999");
    EventSummary p = summary_of("Bob met Alice on 1999");
    EventSummary n = summary_of("Carol saw Dave on 1701");
    std::vector<ContrastiveExample> one{{&c, &p, {&n}}};
    std::vector<ContrastiveExample> two{{&c, &p, {&n}}, {&c, &p, {&n}}};

    EncoderModel model = EncoderModel::init(64, 4, 9);
    GradientBuffer g1 = GradientBuffer::zeros(model), g2 = GradientBuffer::zeros(model);
    batch_loss(model, one, 0.05, 0.5, &g1);
    // duplicating the example keeps the mean, so the gradient is unchanged
    batch_loss(model, two, 0.05, 0.5, &g2);
    for (size_t i = 0; i < g1.projection.size(); ++i)
        CHECK(g1.projection[i] == doctest::Approx(g2.projection[i]).epsilon(1e-12));

    // the contrastive losses never touch the score head
    CHECK(g1.head_bias == 0.0);
    for (double v : g1.head_weights) CHECK(v == 0.0);
}

TEST_CASE("sgd_step rejects non-finite gradients naming the block") {
    EncoderModel model = EncoderModel::init(16, 4, 1);
    GradientBuffer grads = GradientBuffer::zeros(model);
    grads.projection[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        sgd_step(model, grads, 0.1);
        FAIL("expected NumericalError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NumericalError);
        CHECK(std::string(e.what()).find("projection") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip is byte stable") {
    testutil::TempDir dir;
    EncoderModel model = EncoderModel::init(64, 8, 42);
    model.save(dir.file("model.ckpt"));
    EncoderModel loaded = EncoderModel::load(dir.file("model.ckpt"));
    CHECK(loaded.hash_dim == model.hash_dim);
    CHECK(loaded.embed_dim == model.embed_dim);
    CHECK(loaded.rng_seed == model.rng_seed);
    CHECK(loaded.projection == model.projection);
    CHECK(loaded.head_weights == model.head_weights);
    CHECK(loaded.head_bias == model.head_bias);
    CHECK(loaded.serialize() == model.serialize());
    CHECK(loaded.fingerprint() == model.fingerprint());

    loaded.save(dir.file("model2.ckpt"));
    CHECK(testutil::read_file(dir.file("model.ckpt")) ==
          testutil::read_file(dir.file("model2.ckpt")));

    testutil::write_file(dir.file("junk.ckpt"), "not a checkpoint");
    CHECK_THROWS_AS(EncoderModel::load(dir.file("junk.ckpt")), Error);
}
