#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace afp::kin {

// Homogeneous transform with validity checks on the rotation block.
struct Pose {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();

    Eigen::Matrix3d rotation() const { return m.block<3, 3>(0, 0); }
    Eigen::Vector3d translation() const { return m.block<3, 1>(0, 3); }

    // Orthonormality / determinant / bottom row, tolerance 1e-9.
    bool valid(double tol = 1e-9) const;

    static Pose from_translation(const Eigen::Vector3d& t);
    static Pose from_matrix(const Eigen::Matrix4d& m);
};

struct Joint {
    Eigen::Vector3d axis;       // unit vector in the joint's local frame
    Pose origin;                // fixed link offset applied before the joint rotation
    double lo = -3.141592653589793;
    double hi = 3.141592653589793;
};

struct KinematicChain {
    Pose base;
    std::vector<Joint> joints;
    Pose ee_offset;

    int dof() const { return static_cast<int>(joints.size()); }
    void validate() const;  // throws ConfigError on a malformed chain

    static KinematicChain load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Rotation about a unit axis (Rodrigues).
Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle);

struct FkResult {
    Pose pose;
    Eigen::Vector3d position;
};

// Composition of base and per-joint transforms. Joint values outside limits
// are still evaluated (callers may warn).
FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

// Geometric Jacobian of the end-effector position: column j = w_j x (p_ee - p_j).
// This is the reference formula; training uses fk_position_gradient below.
Eigen::Matrix3Xd fk_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

// dL/dq given dL/dposition, computed by differentiating the transform chain
// (prefix * d/dq[rotation] * suffix). Independent code path from fk_jacobian,
// used as the FK node's backward pass in policy training.
Eigen::VectorXd fk_position_gradient(const KinematicChain& chain, const Eigen::VectorXd& q,
                                     const Eigen::Vector3d& dl_dpos);

struct IkOptions {
    double damping = 0.1;
    double tol = 1e-6;
    int max_iter = 200;
};

struct IkResult {
    Eigen::VectorXd q;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Damped least squares toward a position target, joint limits clipped per
// step. Never throws; inspect `converged`.
IkResult solve_ik(const KinematicChain& chain, const Eigen::Vector3d& target,
                  const Eigen::VectorXd& q0, const IkOptions& opts = {});

// Strict variant: throws UnreachableTargetError when not converged.
Eigen::VectorXd inverse_kinematics(const KinematicChain& chain, const Eigen::Vector3d& target,
                                   const Eigen::VectorXd& q0, double tol = 1e-6,
                                   int max_iter = 200);

// Simple test chains.
KinematicChain planar_two_link(double l1 = 1.0, double l2 = 1.0);
KinematicChain planar_three_link(double l1, double l2, double l3, double base_z = 0.0);

}  // namespace afp::kin
