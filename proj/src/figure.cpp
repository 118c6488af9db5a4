#include "posevid/figure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "posevid/rng.hpp"

namespace posevid {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kUp = -kPi / 2.0;  // global up in (cos,sin) with y down
}  // namespace

const std::array<int, kNumJoints> kJointParent = {
    /*pelvis*/ -1,
    /*neck*/ J_PELVIS,
    /*head_top*/ J_NECK,
    /*l_shoulder*/ J_NECK,
    /*l_elbow*/ J_L_SHOULDER,
    /*l_wrist*/ J_L_ELBOW,
    /*l_palm*/ J_L_WRIST,
    /*l_finger0..4*/ J_L_PALM, J_L_PALM, J_L_PALM, J_L_PALM, J_L_PALM,
    /*r_shoulder*/ J_NECK,
    /*r_elbow*/ J_R_SHOULDER,
    /*r_wrist*/ J_R_ELBOW,
    /*r_palm*/ J_R_WRIST,
    /*r_finger0..4*/ J_R_PALM, J_R_PALM, J_R_PALM, J_R_PALM, J_R_PALM,
    /*l_hip*/ J_PELVIS,
    /*l_knee*/ J_L_HIP,
    /*l_ankle*/ J_L_KNEE,
    /*r_hip*/ J_PELVIS,
    /*r_knee*/ J_R_HIP,
    /*r_ankle*/ J_R_KNEE,
};

const std::array<double, kNumJoints> kRestBoneLen = {
    /*pelvis*/ 0.0,
    /*neck*/ 0.22,
    /*head_top*/ 0.09,
    /*l_shoulder*/ 0.07,
    /*l_elbow*/ 0.13,
    /*l_wrist*/ 0.11,
    /*l_palm*/ 0.035,
    /*l_fingers*/ 0.065, 0.065, 0.065, 0.065, 0.065,
    /*r_shoulder*/ 0.07,
    /*r_elbow*/ 0.13,
    /*r_wrist*/ 0.11,
    /*r_palm*/ 0.035,
    /*r_fingers*/ 0.065, 0.065, 0.065, 0.065, 0.065,
    /*l_hip*/ 0.06,
    /*l_knee*/ 0.17,
    /*l_ankle*/ 0.16,
    /*r_hip*/ 0.06,
    /*r_knee*/ 0.17,
    /*r_ankle*/ 0.16,
};

const std::array<double, kNumJoints> kRestAngle = {
    /*pelvis*/ 0.0,
    /*neck*/ 0.0,
    /*head_top*/ 0.0,
    /*l_shoulder*/ 1.90,
    /*l_elbow*/ 1.10,
    /*l_wrist*/ 0.20,
    /*l_palm*/ 0.0,
    /*l_fingers*/ -0.90, -0.45, 0.0, 0.45, 0.90,
    /*r_shoulder*/ -1.90,
    /*r_elbow*/ -1.10,
    /*r_wrist*/ -0.20,
    /*r_palm*/ 0.0,
    /*r_fingers*/ 0.90, 0.45, 0.0, -0.45, -0.90,
    /*l_hip*/ 2.60,
    /*l_knee*/ 0.55,
    /*l_ankle*/ -0.02,
    /*r_hip*/ -2.60,
    /*r_knee*/ -0.55,
    /*r_ankle*/ 0.02,
};

const std::array<const char*, kNumJoints> kJointName = {
    "pelvis",     "neck",       "head_top",   "l_shoulder", "l_elbow",    "l_wrist",
    "l_palm",     "l_finger0",  "l_finger1",  "l_finger2",  "l_finger3",  "l_finger4",
    "r_shoulder", "r_elbow",    "r_wrist",    "r_palm",     "r_finger0",  "r_finger1",
    "r_finger2",  "r_finger3",  "r_finger4",  "l_hip",      "l_knee",     "l_ankle",
    "r_hip",      "r_knee",     "r_ankle",
};

ArticulatedFigure rest_figure() {
    ArticulatedFigure fig;
    fig.bone_len = kRestBoneLen;
    fig.angle = kRestAngle;
    // Default painter depths: right side slightly behind the torso, left side
    // in front, legs behind.
    fig.limb_depth = {
        /*torso*/ 0.50, /*head*/ 0.45,
        /*l_upper*/ 0.30, /*l_fore*/ 0.28, /*l_hand*/ 0.26,
        /*r_upper*/ 0.70, /*r_fore*/ 0.72, /*r_hand*/ 0.74,
        /*l_thigh*/ 0.60, /*l_shin*/ 0.62, /*r_thigh*/ 0.64, /*r_shin*/ 0.66,
    };
    fig.hand_depth = {0.1, 0.3};
    fig.hand_curl = {0.0, 0.0};
    return fig;
}

std::array<Vec2, kNumJoints> forward_kinematics(const ArticulatedFigure& fig) {
    std::array<Vec2, kNumJoints> pos;
    std::array<double, kNumJoints> abs_angle;
    pos[J_PELVIS] = {fig.root_x, fig.root_y};
    abs_angle[J_PELVIS] = kUp;
    for (int j = 1; j < kNumJoints; ++j) {
        const int p = kJointParent[j];
        abs_angle[j] = abs_angle[p] + fig.angle[j];
        pos[j].x = pos[p].x + fig.bone_len[j] * std::cos(abs_angle[j]);
        pos[j].y = pos[p].y + fig.bone_len[j] * std::sin(abs_angle[j]);
    }
    return pos;
}

namespace {

struct MotionTerms {
    // angle[j] += amp * joint_amp[j] * sin(phase + joint_phase[j])
    std::array<double, kNumJoints> joint_amp{};
    std::array<double, kNumJoints> joint_phase{};
    double root_x_amp = 0.0;
    double root_y_amp = 0.0;
    double root_y_phase = 0.0;
    double curl_amp[2] = {0.0, 0.0};
    double hand_depth_amp[2] = {0.0, 0.0};
    double arm_depth_amp = 0.0;  // swings arm depths in antiphase
};

MotionTerms preset_terms(const std::string& preset) {
    MotionTerms m;
    if (preset == "walk") {
        m.joint_amp[J_L_HIP] = 0.45;
        m.joint_amp[J_R_HIP] = 0.45;
        m.joint_phase[J_R_HIP] = kPi;
        m.joint_amp[J_L_KNEE] = 0.35;
        m.joint_phase[J_L_KNEE] = kPi / 2;
        m.joint_amp[J_R_KNEE] = 0.35;
        m.joint_phase[J_R_KNEE] = kPi + kPi / 2;
        m.joint_amp[J_L_ELBOW] = 0.40;
        m.joint_phase[J_L_ELBOW] = kPi;
        m.joint_amp[J_R_ELBOW] = 0.40;
        m.root_x_amp = 0.04;
        m.root_y_amp = 0.012;
        m.arm_depth_amp = 0.25;
    } else if (preset == "wave") {
        m.joint_amp[J_L_SHOULDER] = 0.30;
        m.joint_amp[J_L_ELBOW] = 0.90;
        m.joint_phase[J_L_ELBOW] = kPi / 3;
        m.joint_amp[J_L_WRIST] = 0.50;
        m.joint_phase[J_L_WRIST] = 2 * kPi / 3;
        m.curl_amp[0] = 0.45;
        m.hand_depth_amp[0] = 0.25;
    } else if (preset == "sway") {
        m.joint_amp[J_NECK] = 0.18;
        m.joint_amp[J_HEAD_TOP] = 0.12;
        m.joint_phase[J_HEAD_TOP] = kPi;
        m.joint_amp[J_L_SHOULDER] = 0.15;
        m.joint_amp[J_R_SHOULDER] = 0.15;
        m.root_x_amp = 0.05;
    } else if (preset == "jump") {
        m.joint_amp[J_L_SHOULDER] = 0.55;
        m.joint_phase[J_L_SHOULDER] = kPi;
        m.joint_amp[J_R_SHOULDER] = 0.55;
        m.joint_amp[J_L_KNEE] = 0.30;
        m.joint_amp[J_R_KNEE] = 0.30;
        m.joint_phase[J_R_KNEE] = 0.0;
        m.root_y_amp = 0.05;
        m.root_y_phase = kPi / 2;
        m.curl_amp[0] = 0.9;
        m.curl_amp[1] = 0.9;
    } else {
        throw std::invalid_argument("unknown motion preset: " + preset);
    }
    return m;
}

}  // namespace

ArticulatedFigure figure_at_frame(const MotionSpec& spec, uint64_t seed, int frame) {
    const MotionTerms m = preset_terms(spec.preset);
    ArticulatedFigure fig = rest_figure();
    fig.appearance_seed = seed;
    // Per-clip phase offset; constant across frames so amplitude 0 still
    // yields a frame-constant track.
    Rng rng(mix_seed(seed, 0xF16));
    const double phase0 = rng.uniform(0.0, 2 * kPi);
    const double phase = phase0 + 2 * kPi * spec.frequency_hz * frame / double(spec.fps);
    const double a = spec.amplitude;
    for (int j = 0; j < kNumJoints; ++j) {
        fig.angle[j] += a * m.joint_amp[j] * std::sin(phase + m.joint_phase[j]);
    }
    fig.root_x += a * m.root_x_amp * std::sin(phase);
    fig.root_y += a * m.root_y_amp * std::sin(2 * phase + m.root_y_phase);
    for (int h = 0; h < 2; ++h) {
        fig.hand_curl[h] = std::clamp(std::abs(a * m.curl_amp[h] * std::sin(phase)), 0.0, 1.0);
        fig.hand_depth[h] =
            std::clamp(fig.hand_depth[h] + a * m.hand_depth_amp[h] * std::sin(phase), 0.0, 1.0);
    }
    const double arm_sw = a * m.arm_depth_amp * std::sin(phase);
    for (int l : {LIMB_L_UPPER_ARM, LIMB_L_FOREARM, LIMB_L_HAND}) {
        fig.limb_depth[l] = std::clamp(fig.limb_depth[l] + arm_sw, 0.0, 1.0);
    }
    for (int l : {LIMB_R_UPPER_ARM, LIMB_R_FOREARM, LIMB_R_HAND}) {
        fig.limb_depth[l] = std::clamp(fig.limb_depth[l] - arm_sw, 0.0, 1.0);
    }
    return fig;
}

}  // namespace posevid
