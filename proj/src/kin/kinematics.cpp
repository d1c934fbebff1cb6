#include "afp/kin/kinematics.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "afp/core/errors.hpp"

using nlohmann::json;

namespace afp::kin {
namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& a) {
    Eigen::Matrix3d s;
    s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
    return s;
}

Eigen::Matrix4d joint_transform(const Joint& j, double q) {
    Eigen::Matrix4d rot = Eigen::Matrix4d::Identity();
    rot.block<3, 3>(0, 0) = axis_rotation(j.axis, q);
    return j.origin.m * rot;
}

json pose_to_json(const Pose& p) {
    json a = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) a.push_back(p.m(r, c));
    return a;
}

Pose pose_from_json(const json& a) {
    if (!a.is_array() || a.size() != 16)
        throw ConfigError("chain file: pose must be 16 row-major numbers");
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = a[r * 4 + c].get<double>();
    return Pose::from_matrix(m);
}

}  // namespace

bool Pose::valid(double tol) const {
    const Eigen::Matrix3d r = rotation();
    if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol)
        return false;
    if (std::abs(r.determinant() - 1.0) > tol) return false;
    const Eigen::RowVector4d bottom = m.row(3);
    return (bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() <= tol;
}

Pose Pose::from_translation(const Eigen::Vector3d& t) {
    Pose p;
    p.m.block<3, 1>(0, 3) = t;
    return p;
}

Pose Pose::from_matrix(const Eigen::Matrix4d& m) {
    Pose p;
    p.m = m;
    return p;
}

void KinematicChain::validate() const {
    if (joints.empty()) throw ConfigError("kinematic chain needs at least one joint");
    if (!base.valid()) throw ConfigError("chain base pose is not a rigid transform");
    if (!ee_offset.valid()) throw ConfigError("chain ee_offset pose is not a rigid transform");
    for (std::size_t i = 0; i < joints.size(); ++i) {
        const Joint& j = joints[i];
        if (std::abs(j.axis.norm() - 1.0) > 1e-9)
            throw ConfigError("joint " + std::to_string(i) + ": axis must be unit length");
        if (!(j.lo < j.hi))
            throw ConfigError("joint " + std::to_string(i) + ": limits must satisfy lo < hi");
        if (!j.origin.valid())
            throw ConfigError("joint " + std::to_string(i) + ": origin is not a rigid transform");
    }
}

Eigen::Matrix3d axis_rotation(const Eigen::Vector3d& axis, double angle) {
    const Eigen::Matrix3d k = skew(axis);
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

FkResult forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q) {
    if (q.size() != chain.dof())
        throw InputError("forward_kinematics: expected " + std::to_string(chain.dof()) +
                         " joint values, got " + std::to_string(q.size()));
    Eigen::Matrix4d t = chain.base.m;
    for (int j = 0; j < chain.dof(); ++j) t = t * joint_transform(chain.joints[j], q[j]);
    t = t * chain.ee_offset.m;
    FkResult out;
    out.pose = Pose::from_matrix(t);
    out.position = t.block<3, 1>(0, 3);
    return out;
}

Eigen::Matrix3Xd fk_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
    if (q.size() != chain.dof())
        throw InputError("fk_jacobian: joint vector length mismatch");
    const int n = chain.dof();
    // Walk the chain collecting each joint's world axis and origin.
    std::vector<Eigen::Vector3d> axes(n), origins(n);
    Eigen::Matrix4d t = chain.base.m;
    for (int j = 0; j < n; ++j) {
        t = t * chain.joints[j].origin.m;
        axes[j] = t.block<3, 3>(0, 0) * chain.joints[j].axis;
        origins[j] = t.block<3, 1>(0, 3);
        Eigen::Matrix4d rot = Eigen::Matrix4d::Identity();
        rot.block<3, 3>(0, 0) = axis_rotation(chain.joints[j].axis, q[j]);
        t = t * rot;
    }
    const Eigen::Vector3d p_ee = (t * chain.ee_offset.m).block<3, 1>(0, 3);
    Eigen::Matrix3Xd jac(3, n);
    for (int j = 0; j < n; ++j) jac.col(j) = axes[j].cross(p_ee - origins[j]);
    return jac;
}

Eigen::VectorXd fk_position_gradient(const KinematicChain& chain, const Eigen::VectorXd& q,
                                     const Eigen::Vector3d& dl_dpos) {
    if (q.size() != chain.dof())
        throw InputError("fk_position_gradient: joint vector length mismatch");
    const int n = chain.dof();
    // Prefixes up to (excluding) joint j, suffixes after joint j.
    std::vector<Eigen::Matrix4d> prefix(n + 1), suffix(n + 1);
    prefix[0] = chain.base.m;
    for (int j = 0; j < n; ++j)
        prefix[j + 1] = prefix[j] * joint_transform(chain.joints[j], q[j]);
    suffix[n] = chain.ee_offset.m;
    for (int j = n - 1; j >= 0; --j)
        suffix[j] = joint_transform(chain.joints[j], q[j]) * suffix[j + 1];

    Eigen::VectorXd grad(n);
    for (int j = 0; j < n; ++j) {
        // d/dq of the joint's rotation: [axis]_x * R(axis, q).
        Eigen::Matrix4d drot = Eigen::Matrix4d::Zero();
        drot.block<3, 3>(0, 0) =
            skew(chain.joints[j].axis) * axis_rotation(chain.joints[j].axis, q[j]);
        const Eigen::Matrix4d dt =
            prefix[j] * chain.joints[j].origin.m * drot * suffix[j + 1];
        grad[j] = dl_dpos.dot(dt.block<3, 1>(0, 3));
    }
    return grad;
}

IkResult solve_ik(const KinematicChain& chain, const Eigen::Vector3d& target,
                  const Eigen::VectorXd& q0, const IkOptions& opts) {
    IkResult res;
    res.q = q0;
    Eigen::VectorXd best_q = q0;
    double best_residual = (forward_kinematics(chain, q0).position - target).norm();
    if (best_residual <= opts.tol) {
        res.residual = best_residual;
        res.converged = true;
        return res;
    }
    const double lambda2 = opts.damping * opts.damping;
    for (int it = 0; it < opts.max_iter; ++it) {
        const Eigen::Vector3d err = target - forward_kinematics(chain, res.q).position;
        const Eigen::Matrix3Xd jac = fk_jacobian(chain, res.q);
        const Eigen::Matrix3d jjt =
            jac * jac.transpose() + lambda2 * Eigen::Matrix3d::Identity();
        const Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(err);
        res.q += dq;
        for (int j = 0; j < chain.dof(); ++j)
            res.q[j] = std::clamp(res.q[j], chain.joints[j].lo, chain.joints[j].hi);
        const double r = (forward_kinematics(chain, res.q).position - target).norm();
        res.iterations = it + 1;
        if (r < best_residual) {
            best_residual = r;
            best_q = res.q;
        }
        if (r <= opts.tol) {
            res.residual = r;
            res.converged = true;
            return res;
        }
    }
    res.q = best_q;
    res.residual = best_residual;
    res.converged = false;
    return res;
}

Eigen::VectorXd inverse_kinematics(const KinematicChain& chain, const Eigen::Vector3d& target,
                                   const Eigen::VectorXd& q0, double tol, int max_iter) {
    IkOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    IkResult res = solve_ik(chain, target, q0, opts);
    if (!res.converged)
        throw UnreachableTargetError(
            "IK did not converge (best residual " + std::to_string(res.residual) + " m)",
            res.residual);
    return res.q;
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open chain file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("chain file parse error: " + std::string(e.what()));
    }
    KinematicChain chain;
    if (doc.contains("base")) chain.base = pose_from_json(doc["base"]);
    if (doc.contains("ee_offset")) chain.ee_offset = pose_from_json(doc["ee_offset"]);
    if (!doc.contains("joints")) throw ConfigError("chain file: missing 'joints'");
    for (const auto& jj : doc["joints"]) {
        Joint j;
        auto ax = jj.at("axis");
        j.axis = Eigen::Vector3d(ax[0].get<double>(), ax[1].get<double>(), ax[2].get<double>());
        j.origin = pose_from_json(jj.at("origin"));
        if (jj.contains("limits")) {
            j.lo = jj["limits"][0].get<double>();
            j.hi = jj["limits"][1].get<double>();
        }
        if (jj.contains("type") && jj["type"].get<std::string>() != "revolute")
            throw ConfigError("chain file: only revolute joints are supported");
        chain.joints.push_back(j);
    }
    chain.validate();
    return chain;
}

void KinematicChain::save(const std::filesystem::path& path) const {
    json doc;
    doc["base"] = pose_to_json(base);
    doc["ee_offset"] = pose_to_json(ee_offset);
    doc["joints"] = json::array();
    for (const auto& j : joints) {
        json jj;
        jj["axis"] = {j.axis.x(), j.axis.y(), j.axis.z()};
        jj["origin"] = pose_to_json(j.origin);
        jj["limits"] = {j.lo, j.hi};
        jj["type"] = "revolute";
        doc["joints"].push_back(jj);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write chain file: " + path.string());
    out << doc.dump(2) << "\n";
}

KinematicChain planar_two_link(double l1, double l2) {
    KinematicChain chain;
    Joint j1;
    j1.axis = Eigen::Vector3d::UnitZ();
    Joint j2;
    j2.axis = Eigen::Vector3d::UnitZ();
    j2.origin = Pose::from_translation(Eigen::Vector3d(l1, 0, 0));
    chain.joints = {j1, j2};
    chain.ee_offset = Pose::from_translation(Eigen::Vector3d(l2, 0, 0));
    return chain;
}

KinematicChain planar_three_link(double l1, double l2, double l3, double base_z) {
    KinematicChain chain;
    chain.base = Pose::from_translation(Eigen::Vector3d(0, 0, base_z));
    Joint j1;
    j1.axis = Eigen::Vector3d::UnitZ();
    Joint j2;
    j2.axis = Eigen::Vector3d::UnitZ();
    j2.origin = Pose::from_translation(Eigen::Vector3d(l1, 0, 0));
    Joint j3;
    j3.axis = Eigen::Vector3d::UnitZ();
    j3.origin = Pose::from_translation(Eigen::Vector3d(l2, 0, 0));
    chain.joints = {j1, j2, j3};
    chain.ee_offset = Pose::from_translation(Eigen::Vector3d(l3, 0, 0));
    return chain;
}

}  // namespace afp::kin
