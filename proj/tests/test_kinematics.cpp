#include <doctest.h>

#include <cmath>

#include "afp/core/errors.hpp"
#include "afp/core/rng.hpp"
#include "afp/kin/kinematics.hpp"
#include "test_util.hpp"

using namespace afp;
using namespace afp::kin;

namespace {

// Mixed-axis spatial chain used to exercise FK off the plane.
KinematicChain spatial_chain() {
    KinematicChain c;
    Joint j1;
    j1.axis = Eigen::Vector3d::UnitZ();
    j1.origin = Pose::from_translation({0, 0, 0.2});
    Joint j2;
    j2.axis = Eigen::Vector3d::UnitY();
    j2.origin = Pose::from_translation({0.25, 0, 0});
    Joint j3;
    j3.axis = Eigen::Vector3d::UnitX();
    j3.origin = Pose::from_translation({0.2, 0.05, 0});
    c.joints = {j1, j2, j3};
    c.ee_offset = Pose::from_translation({0.15, 0, 0.02});
    return c;
}

}  // namespace

TEST_CASE("planar two-link FK matches the analytic formula") {
    const double l1 = 0.8, l2 = 0.6;
    KinematicChain chain = planar_two_link(l1, l2);
    Rng rng(17);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd q(2);
        q << rng.uniform(-M_PI, M_PI), rng.uniform(-M_PI, M_PI);
        const Eigen::Vector3d p = forward_kinematics(chain, q).position;
        const double x = l1 * std::cos(q[0]) + l2 * std::cos(q[0] + q[1]);
        const double y = l1 * std::sin(q[0]) + l2 * std::sin(q[0] + q[1]);
        CHECK(std::abs(p.x() - x) < 1e-9);
        CHECK(std::abs(p.y() - y) < 1e-9);
        CHECK(std::abs(p.z()) < 1e-9);
    }
}

TEST_CASE("geometric jacobian matches central finite differences") {
    for (const KinematicChain& chain :
         {planar_three_link(0.3, 0.25, 0.2, 0.1), spatial_chain()}) {
        Rng rng(23);
        for (int k = 0; k < 20; ++k) {
            Eigen::VectorXd q(chain.dof());
            for (int i = 0; i < chain.dof(); ++i) q[i] = rng.uniform(-1.5, 1.5);
            const Eigen::Matrix3Xd J = fk_jacobian(chain, q);
            const double h = 1e-6;
            for (int i = 0; i < chain.dof(); ++i) {
                Eigen::VectorXd qp = q, qm = q;
                qp[i] += h;
                qm[i] -= h;
                const Eigen::Vector3d fd = (forward_kinematics(chain, qp).position -
                                            forward_kinematics(chain, qm).position) /
                                           (2 * h);
                CHECK((J.col(i) - fd).cwiseAbs().maxCoeff() < 1e-6);
            }
        }
    }
}

TEST_CASE("transform-chain gradient agrees with the jacobian path") {
    for (const KinematicChain& chain :
         {planar_three_link(0.3, 0.25, 0.2, 0.1), spatial_chain()}) {
        Rng rng(29);
        for (int k = 0; k < 50; ++k) {
            Eigen::VectorXd q(chain.dof());
            for (int i = 0; i < chain.dof(); ++i) q[i] = rng.uniform(-2.0, 2.0);
            Eigen::Vector3d dl(rng.normal(), rng.normal(), rng.normal());
            const Eigen::VectorXd g = fk_position_gradient(chain, q, dl);
            const Eigen::VectorXd ref = fk_jacobian(chain, q).transpose() * dl;
            CHECK((g - ref).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("ik round-trips reachable targets") {
    KinematicChain chain = planar_three_link(0.3, 0.25, 0.2, 0.1);
    Rng rng(31);
    int solved = 0;
    for (int k = 0; k < 25; ++k) {
        Eigen::VectorXd q(3);
        for (int i = 0; i < 3; ++i) q[i] = rng.uniform(-1.2, 1.2);
        const Eigen::Vector3d target = forward_kinematics(chain, q).position;
        IkResult r = solve_ik(chain, target, Eigen::VectorXd::Zero(3));
        if (!r.converged) continue;
        ++solved;
        CHECK((forward_kinematics(chain, r.q).position - target).norm() < 1e-5);
    }
    CHECK(solved >= 20);
}

TEST_CASE("ik respects joint limits") {
    KinematicChain chain = planar_two_link(0.5, 0.5);
    for (auto& j : chain.joints) {
        j.lo = -1.0;
        j.hi = 1.0;
    }
    IkResult r = solve_ik(chain, {-0.9, 0.1, 0.0}, Eigen::VectorXd::Zero(2));
    for (int i = 0; i < 2; ++i) {
        CHECK(r.q[i] >= -1.0);
        CHECK(r.q[i] <= 1.0);
    }
}

TEST_CASE("strict ik reports the best residual for unreachable targets") {
    KinematicChain chain = planar_two_link(0.5, 0.5);
    try {
        inverse_kinematics(chain, {5.0, 0.0, 0.0}, Eigen::VectorXd::Zero(2));
        FAIL("expected UnreachableTargetError");
    } catch (const UnreachableTargetError& e) {
        CHECK(e.best_residual() == doctest::Approx(4.0).epsilon(0.01));
    }
}

TEST_CASE("fk is equivariant under base translation") {
    KinematicChain chain = spatial_chain();
    Eigen::VectorXd q(3);
    q << 0.4, -0.7, 1.1;
    const Eigen::Vector3d p0 = forward_kinematics(chain, q).position;
    const Eigen::Vector3d shift(0.3, -0.2, 0.5);
    chain.base = Pose::from_translation(shift);
    const Eigen::Vector3d p1 = forward_kinematics(chain, q).position;
    CHECK((p1 - (p0 + shift)).norm() < 1e-12);
}

TEST_CASE("chain serialization round-trips") {
    testutil::TempDir dir;
    KinematicChain chain = spatial_chain();
    chain.joints[1].lo = -2.0;
    chain.joints[1].hi = 2.5;
    const auto path = dir.path / "chain.json";
    chain.save(path);
    KinematicChain back = KinematicChain::load(path);
    REQUIRE(back.dof() == chain.dof());
    Eigen::VectorXd q(3);
    q << 0.3, 0.6, -0.9;
    CHECK((forward_kinematics(back, q).position - forward_kinematics(chain, q).position)
              .norm() < 1e-12);
    CHECK(back.joints[1].lo == doctest::Approx(-2.0));
    CHECK(back.joints[1].hi == doctest::Approx(2.5));
}

TEST_CASE("pose validity catches malformed rotations") {
    Pose p;
    CHECK(p.valid());
    p.m(0, 0) = 2.0;
    CHECK_FALSE(p.valid());
}

TEST_CASE("chain validation rejects non-unit axes") {
    KinematicChain chain = planar_two_link();
    chain.joints[0].axis = {0, 0, 2};
    CHECK_THROWS_AS(chain.validate(), ConfigError);
}
