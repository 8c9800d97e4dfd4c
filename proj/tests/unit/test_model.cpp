#include <gtest/gtest.h>

#include <cmath>

#include "bgw/model.hpp"
#include "bgw/model_io.hpp"
#include "fixtures.hpp"

using namespace bgw;

namespace {

ModelSpec tabular(std::vector<double> pmf, double lambda, ImmigrationLaw imm = NoImmigration{}, double mu = 0.0) {
    ModelSpec s;
    s.offspring = TabularOffspring{std::move(pmf)};
    s.lambda = lambda;
    s.immigration = std::move(imm);
    s.mu = mu;
    return s;
}

bool has_violation(const ModelSpec& s, const std::string& what) {
    for (const auto& v : validate(s))
        if (v.find(what) != std::string::npos)
            return true;
    return false;
}

} // namespace

TEST(Pgf, OffspringExamples) {
    EXPECT_NEAR(pgf_offspring(fx::model(1).offspring, 0.5), 0.8125, 1e-15);
    EXPECT_NEAR(pgf_offspring(fx::model(4).offspring, 0.75), 0.6, 1e-15);
    for (int i = 1; i <= 5; ++i)
        EXPECT_NEAR(pgf_offspring(fx::model(i).offspring, 1.0), 1.0, 1e-12);
}

TEST(Pgf, ImmigrationExamples) {
    EXPECT_NEAR(pgf_immigration(fx::model(2).immigration, 0.5), 2.0, 1e-15);
    EXPECT_NEAR(pgf_immigration(fx::model(3).immigration, 0.5), 0.5, 1e-15);
    EXPECT_NEAR(pgf_immigration(fx::model(5).immigration, 0.75), 0.5, 1e-15);
    for (int i : {2, 3, 5})
        EXPECT_NEAR(pgf_immigration(fx::model(i).immigration, 1.0), 1.0, 1e-12);
}

TEST(Pgf, DomainAndMissingLaw) {
    EXPECT_THROW(pgf_offspring(fx::model(1).offspring, 0.0), DomainError);
    EXPECT_THROW(pgf_offspring(fx::model(1).offspring, 1.5), DomainError);
    EXPECT_THROW(pgf_immigration(fx::model(1).immigration, 0.5), PreconditionError);
    EXPECT_THROW(pgf_immigration(fx::model(2).immigration, -0.1), DomainError);
}

TEST(Normalize, RemovesP1) {
    auto a = normalize_remove_p1(tabular({0.5, 0.5}, 2.0));
    auto& pa = std::get<TabularOffspring>(a.offspring).pmf;
    EXPECT_NEAR(pa[0], 1.0, 1e-15);
    EXPECT_NEAR(a.lambda, 1.0, 1e-15);

    auto b = normalize_remove_p1(tabular({0.25, 0.5, 0.25}, 4.0));
    auto& pb = std::get<TabularOffspring>(b.offspring).pmf;
    EXPECT_NEAR(pb[0], 0.5, 1e-15);
    EXPECT_NEAR(pb[1], 0.0, 0.0);
    EXPECT_NEAR(pb[2], 0.5, 1e-15);
    EXPECT_NEAR(b.lambda, 2.0, 1e-15);
    ASSERT_TRUE(b.lambda_original);
    EXPECT_EQ(*b.lambda_original, 4.0);

    auto m1 = fx::model(1);
    auto c = normalize_remove_p1(m1);
    EXPECT_EQ(std::get<TabularOffspring>(c.offspring).pmf, std::get<TabularOffspring>(m1.offspring).pmf);
    EXPECT_EQ(c.lambda, m1.lambda);
    // idempotent
    auto d = normalize_remove_p1(b);
    EXPECT_EQ(std::get<TabularOffspring>(d.offspring).pmf, pb);
    EXPECT_EQ(d.lambda, b.lambda);

    EXPECT_THROW(normalize_remove_p1(tabular({0.0, 1.0}, 1.0)), PreconditionError);
}

TEST(Validate, Examples) {
    for (int i = 1; i <= 5; ++i)
        EXPECT_TRUE(validate(fx::model(i)).empty()) << "m" << i;
    EXPECT_TRUE(has_violation(tabular({1.0}, 1.0, make_tabular_immigration(1.0, {}), 1.0), "a.s. nonincreasing paths"));
    EXPECT_TRUE(has_violation(tabular({0.0, 0.0, 1.0}, 1.0), "p0>0"));
    EXPECT_TRUE(has_violation(tabular({0.5, 0.0, 0.5}, 0.0), "lambda > 0"));
    EXPECT_TRUE(has_violation(tabular({0.5, 0.0, 0.4}, 1.0), "sum"));
    EXPECT_THROW(require_valid(tabular({0.0, 0.0, 1.0}, 1.0)), PreconditionError);
}

TEST(Roots, Varphi) {
    EXPECT_NEAR(root_varphi(fx::model(2)), 0.5, 1e-14);
    EXPECT_EQ(root_varphi(fx::model(1)), 1.0);
    EXPECT_NEAR(root_varphi(fx::model(4)), 0.36, 1e-14);
    EXPECT_EQ(root_varphi(fx::model(3)), 1.0);
}

TEST(Roots, PhiQ) {
    EXPECT_NEAR(root_phi_q(fx::model(2), 1.0), 0.5, 1e-14);
    EXPECT_EQ(root_phi_q(fx::model(3), 1.0), 0.0);
    EXPECT_EQ(root_phi_q(fx::model(2), 0.0), 1.0);
    EXPECT_EQ(root_phi(fx::model(1)), 0.0);
}

TEST(Roots, VarphiQbar) {
    EXPECT_EQ(root_varphi_qbar(fx::model(1), 0.0), 1.0);
    EXPECT_NEAR(root_varphi_qbar(fx::model(1), 1.0), fx::m1_varphi_1, 1e-14);
    EXPECT_NEAR(root_varphi_qbar(fx::model(2), 3.0), fx::m2_varphi_3, 1e-14);
}

TEST(Explosive, Examples) {
    EXPECT_FALSE(is_explosive(fx::model(1)));
    EXPECT_FALSE(is_explosive(fx::model(2)));
    EXPECT_TRUE(is_explosive(fx::model(4)));
    for (int i : {1, 2, 3, 5})
        EXPECT_FALSE(is_explosive(fx::model(i))) << "tabular offspring is never explosive";
}

TEST(Classify, Examples) {
    auto r1 = classify(fx::model(1));
    EXPECT_EQ(r1.criticality, Criticality::subcritical);
    EXPECT_EQ(r1.varphi, 1.0);
    EXPECT_EQ(r1.phi, 0.0);
    EXPECT_FALSE(r1.explosive);

    auto r2 = classify(fx::model(2));
    EXPECT_EQ(r2.criticality, Criticality::supercritical);
    EXPECT_NEAR(r2.varphi, 0.5, 1e-14);
    EXPECT_EQ(r2.phi, 1.0);
    EXPECT_FALSE(r2.explosive);

    auto r3 = classify(fx::model(3));
    EXPECT_EQ(r3.criticality, Criticality::subcritical);
    EXPECT_NEAR(r3.mean_offspring, 0.5, 1e-15);
    EXPECT_EQ(r3.phi, 0.0);

    auto r4 = classify(fx::model(4));
    EXPECT_EQ(r4.criticality, Criticality::supercritical);
    EXPECT_TRUE(r4.explosive);
    EXPECT_TRUE(std::isinf(r4.mean_offspring));
}

// Root properties on a family of supercritical tabular laws.
TEST(RootProperties, VarphiIsSmallestRoot) {
    for (double p2 : {0.55, 0.6, 0.75, 0.9}) {
        for (double p3 : {0.0, 0.05}) {
            const double p0 = 1.0 - p2 - p3;
            auto s = tabular({p0, 0.0, p2, p3}, 1.3);
            const double tol = 1e-15;
            const double v = root_varphi(s, tol);
            ASSERT_LT(v, 1.0);
            const double d = offspring_pgf_derivative(s.offspring, v);
            EXPECT_LE(std::abs(pgf_offspring(s.offspring, v) - v), 10 * tol * std::max(1.0, std::abs(d)));
            for (int i = 1; i < 50; ++i) {
                const double z = v * i / 50.0;
                EXPECT_GT(pgf_offspring(s.offspring, z), z);
            }
        }
    }
}

TEST(RootProperties, PhiQDecreasing) {
    const auto s = fx::model(2);
    const double phi = root_phi(s);
    double prev = phi;
    for (double q : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
        const double v = root_phi_q(s, q);
        EXPECT_LT(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
}

TEST(RootProperties, VarphiQbarDecreasing) {
    for (int i : {1, 2, 4}) {
        const auto s = fx::model(i);
        const double varphi = root_varphi(s);
        if (varphi < 1.0) {
            EXPECT_NEAR(root_varphi_qbar(s, 0.0), varphi, 1e-14);
        }
        double prev = varphi;
        for (double qb : {0.05, 0.25, 1.0, 3.0, 10.0}) {
            const double v = root_varphi_qbar(s, qb);
            EXPECT_LT(v, prev) << "m" << i << " qbar=" << qb;
            prev = v;
        }
    }
}

TEST(ModelIo, RoundTrip) {
    for (int i = 1; i <= 5; ++i) {
        const auto s = fx::model(i);
        const auto t = model_from_json(nlohmann::json::parse(model_to_json(s).dump()));
        EXPECT_EQ(model_to_json(s).dump(), model_to_json(t).dump());
        for (double v : {0.1, 0.5, 0.9})
            EXPECT_NEAR(pgf_offspring(s.offspring, v), pgf_offspring(t.offspring, v), 1e-15);
    }
}

TEST(ModelIo, NormalizesP1OnLoad) {
    auto j = nlohmann::json::parse(R"({"offspring":{"type":"tabular","pmf":{"0":0.25,"1":0.5,"2":0.25}},
        "lambda":4,"immigration":{"type":"none"},"mu":0})");
    const auto s = model_from_json(j);
    EXPECT_NEAR(s.lambda, 2.0, 1e-15);
    ASSERT_TRUE(s.lambda_original);
    EXPECT_EQ(*s.lambda_original, 4.0);
}

TEST(ModelIo, RejectsMalformed) {
    EXPECT_THROW(model_from_json(nlohmann::json::parse(R"({"offspring":{"type":"cubic"},"lambda":1})")), Error);
    EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}
