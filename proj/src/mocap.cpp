#include "vsens/mocap.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "vsens/error.hpp"
#include "vsens/format.hpp"

namespace vsens::mocap {

std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::Xposition: return "Xposition";
        case Channel::Yposition: return "Yposition";
        case Channel::Zposition: return "Zposition";
        case Channel::Xrotation: return "Xrotation";
        case Channel::Yrotation: return "Yrotation";
        case Channel::Zrotation: return "Zrotation";
    }
    return "?";
}

std::optional<Channel> parse_channel(std::string_view name) {
    static constexpr Channel all[] = {Channel::Xposition, Channel::Yposition, Channel::Zposition,
                                      Channel::Xrotation, Channel::Yrotation, Channel::Zrotation};
    for (Channel c : all) {
        if (channel_name(c) == name) {
            return c;
        }
    }
    return std::nullopt;
}

bool is_rotation(Channel c) {
    return c == Channel::Xrotation || c == Channel::Yrotation || c == Channel::Zrotation;
}

std::size_t Skeleton::channel_count() const {
    std::size_t n = 0;
    for (const auto& j : joints) {
        n += j.channels.size();
    }
    return n;
}

std::optional<std::size_t> Skeleton::find(std::string_view name) const {
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (joints[i].name == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t Skeleton::require(std::string_view name) const {
    if (auto idx = find(name)) {
        return *idx;
    }
    throw Error(ErrorCode::UnknownJoint, "unknown joint '" + std::string(name) + "'");
}

double AnimationClip::duration() const {
    const std::size_t n = frame_count();
    return n == 0 ? 0.0 : static_cast<double>(n - 1) * frame_time;
}

namespace {

struct Token {
    std::string_view text;
    int line = 0;
};

/// Whitespace tokenizer that remembers line numbers and can hand over the
/// remaining input line by line (the MOTION rows are line-structured).
class Lexer {
public:
    explicit Lexer(std::string_view text) {
        std::size_t start = 0;
        while (start <= text.size()) {
            std::size_t end = text.find('\n', start);
            if (end == std::string_view::npos) {
                end = text.size();
            }
            std::string_view line = text.substr(start, end - start);
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            if (end == text.size() && line.empty() && start > 0) {
                break;  // trailing newline does not open another line
            }
            lines_.push_back(line);
            start = end + 1;
        }
    }

    std::optional<Token> next() {
        while (line_ < lines_.size()) {
            const std::string_view l = lines_[line_];
            while (pos_ < l.size() && is_space(l[pos_])) {
                ++pos_;
            }
            if (pos_ >= l.size()) {
                ++line_;
                pos_ = 0;
                continue;
            }
            const std::size_t begin = pos_;
            while (pos_ < l.size() && !is_space(l[pos_])) {
                ++pos_;
            }
            return Token{l.substr(begin, pos_ - begin), static_cast<int>(line_ + 1)};
        }
        return std::nullopt;
    }

    int last_line() const { return static_cast<int>(lines_.size()); }

    /// Remainder of the current line after the cursor.
    std::string_view rest_of_line() const {
        if (line_ >= lines_.size()) {
            return {};
        }
        return lines_[line_].substr(pos_);
    }

    /// Moves the cursor to the start of the next line and returns its index.
    std::size_t skip_to_next_line() {
        ++line_;
        pos_ = 0;
        return line_;
    }

    const std::vector<std::string_view>& lines() const { return lines_; }

    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

private:
    std::vector<std::string_view> lines_;
    std::size_t line_ = 0;
    std::size_t pos_ = 0;
};

double parse_number(std::string_view s, int line) {
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) {
        throw Error(ErrorCode::MalformedNumber, "malformed number '" + std::string(s) + "'", line);
    }
    return value;
}

long parse_integer(std::string_view s, int line) {
    long value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::MalformedNumber, "malformed integer '" + std::string(s) + "'", line);
    }
    return value;
}

class BvhParser {
public:
    BvhParser(std::string_view text, double unit_scale) : lex_(text) {
        motion_.skeleton.unit_scale = unit_scale;
    }

    Motion parse() {
        auto first = lex_.next();
        if (!first || first->text != "HIERARCHY") {
            throw Error(ErrorCode::MissingSection, "missing HIERARCHY section",
                        first ? first->line : 1);
        }
        auto root = expect_any("ROOT");
        if (root.text != "ROOT") {
            throw Error(ErrorCode::Syntax, "expected ROOT, got '" + std::string(root.text) + "'",
                        root.line);
        }
        parse_joint(std::nullopt, false, root.line);

        auto motion = lex_.next();
        if (!motion) {
            throw Error(ErrorCode::MissingSection, "missing MOTION section", lex_.last_line());
        }
        if (motion->text == "}") {
            throw Error(ErrorCode::UnbalancedBraces, "unmatched '}'", motion->line);
        }
        if (motion->text == "ROOT") {
            throw Error(ErrorCode::Syntax, "only one ROOT is supported", motion->line);
        }
        if (motion->text != "MOTION") {
            throw Error(ErrorCode::Syntax,
                        "expected MOTION, got '" + std::string(motion->text) + "'", motion->line);
        }
        parse_motion();
        check_duplicate_names();
        return std::move(motion_);
    }

private:
    Token expect_any(std::string_view what) {
        auto tok = lex_.next();
        if (!tok) {
            throw Error(depth_ > 0 ? ErrorCode::UnbalancedBraces : ErrorCode::Syntax,
                        "unexpected end of file, expected " + std::string(what), lex_.last_line());
        }
        return *tok;
    }

    void expect(std::string_view keyword) {
        auto tok = expect_any(keyword);
        if (tok.text != keyword) {
            const bool brace_issue = keyword == "{" || keyword == "}" || tok.text == "}" ||
                                     tok.text == "MOTION";
            throw Error(brace_issue ? ErrorCode::UnbalancedBraces : ErrorCode::Syntax,
                        "expected '" + std::string(keyword) + "', got '" + std::string(tok.text) +
                            "'",
                        tok.line);
        }
    }

    double number() {
        auto tok = expect_any("number");
        return parse_number(tok.text, tok.line);
    }

    void parse_joint(std::optional<std::size_t> parent, bool end_site, int line) {
        Joint joint;
        joint.parent = parent;
        joint.is_end_site = end_site;
        if (end_site) {
            joint.name = motion_.skeleton.joints[*parent].name + "_End";
        } else {
            auto name = expect_any("joint name");
            if (name.text == "{" || name.text == "}") {
                throw Error(ErrorCode::Syntax, "joint without a name", name.line);
            }
            joint.name = std::string(name.text);
        }
        expect("{");
        ++depth_;

        // OFFSET first; remember its line for diagnostics.
        auto off = expect_any("OFFSET");
        if (off.text != "OFFSET") {
            throw Error(ErrorCode::Syntax, "expected OFFSET, got '" + std::string(off.text) + "'",
                        off.line);
        }
        joint.offset = Vec3{number(), number(), number()};

        const std::size_t index = motion_.skeleton.joints.size();
        motion_.skeleton.joints.push_back(joint);

        if (end_site) {
            expect("}");
            --depth_;
            return;
        }

        for (;;) {
            auto tok = expect_any("'}'");
            if (tok.text == "CHANNELS") {
                parse_channels(index, tok.line);
            } else if (tok.text == "JOINT") {
                parse_joint(index, false, tok.line);
            } else if (tok.text == "End") {
                expect("Site");
                parse_joint(index, true, tok.line);
            } else if (tok.text == "}") {
                --depth_;
                return;
            } else if (tok.text == "MOTION" || tok.text == "ROOT") {
                throw Error(ErrorCode::UnbalancedBraces,
                            "joint '" + motion_.skeleton.joints[index].name + "' opened at line " +
                                std::to_string(line) + " is never closed",
                            tok.line);
            } else {
                throw Error(ErrorCode::Syntax, "unexpected token '" + std::string(tok.text) + "'",
                            tok.line);
            }
        }
    }

    void parse_channels(std::size_t index, int line) {
        Joint& joint = motion_.skeleton.joints[index];
        if (!joint.channels.empty()) {
            throw Error(ErrorCode::Syntax, "duplicate CHANNELS for joint '" + joint.name + "'", line);
        }
        auto count_tok = expect_any("channel count");
        const long count = parse_integer(count_tok.text, count_tok.line);
        if (count < 0 || count > 6) {
            throw Error(ErrorCode::Syntax, "channel count must be in [0, 6]", count_tok.line);
        }
        bool seen[6] = {};
        for (long i = 0; i < count; ++i) {
            auto tok = expect_any("channel label");
            auto ch = parse_channel(tok.text);
            if (!ch) {
                throw Error(ErrorCode::Syntax, "unknown channel '" + std::string(tok.text) + "'",
                            tok.line);
            }
            if (seen[static_cast<int>(*ch)]) {
                throw Error(ErrorCode::Syntax, "channel '" + std::string(tok.text) + "' repeated",
                            tok.line);
            }
            seen[static_cast<int>(*ch)] = true;
            joint.channels.push_back(*ch);
        }
    }

    void parse_motion() {
        auto& skel = motion_.skeleton;
        std::size_t offset = 0;
        for (auto& j : skel.joints) {
            j.channel_offset = offset;
            offset += j.channels.size();
        }
        if (offset == 0) {
            throw Error(ErrorCode::Syntax, "skeleton declares no channels", lex_.last_line());
        }

        auto frames_tok = expect_any("Frames:");
        if (frames_tok.text != "Frames:") {
            throw Error(ErrorCode::Syntax,
                        "expected 'Frames:', got '" + std::string(frames_tok.text) + "'",
                        frames_tok.line);
        }
        auto n_tok = expect_any("frame count");
        const long frames = parse_integer(n_tok.text, n_tok.line);
        if (frames < 1) {
            throw Error(ErrorCode::Syntax, "frame count must be >= 1", n_tok.line);
        }
        auto frame_tok = expect_any("Frame Time:");
        auto time_tok = expect_any("Frame Time:");
        if (frame_tok.text != "Frame" || time_tok.text != "Time:") {
            throw Error(ErrorCode::Syntax, "expected 'Frame Time:'", frame_tok.line);
        }
        auto dt_tok = expect_any("frame time");
        const double dt = parse_number(dt_tok.text, dt_tok.line);
        if (!(dt > 0.0)) {
            throw Error(ErrorCode::Syntax, "frame time must be > 0", dt_tok.line);
        }
        if (!trim(lex_.rest_of_line()).empty()) {
            throw Error(ErrorCode::Syntax, "trailing data after frame time", dt_tok.line);
        }

        auto& clip = motion_.clip;
        clip.frame_time = dt;
        clip.width = offset;
        clip.values.reserve(static_cast<std::size_t>(frames) * offset);

        const auto& lines = lex_.lines();
        long rows = 0;
        for (std::size_t li = lex_.skip_to_next_line(); li < lines.size(); ++li) {
            const std::string_view line = trim(lines[li]);
            if (line.empty()) {
                continue;
            }
            const int line_no = static_cast<int>(li + 1);
            if (rows == frames) {
                throw Error(ErrorCode::FrameCountMismatch,
                            "more motion rows than the declared " + std::to_string(frames) +
                                " frames",
                            line_no);
            }
            const std::size_t before = clip.values.size();
            std::size_t pos = 0;
            while (pos < line.size()) {
                while (pos < line.size() && Lexer::is_space(line[pos])) {
                    ++pos;
                }
                if (pos >= line.size()) {
                    break;
                }
                const std::size_t begin = pos;
                while (pos < line.size() && !Lexer::is_space(line[pos])) {
                    ++pos;
                }
                clip.values.push_back(parse_number(line.substr(begin, pos - begin), line_no));
            }
            const std::size_t width = clip.values.size() - before;
            if (width != offset) {
                throw Error(ErrorCode::ChannelMismatch,
                            "motion row " + std::to_string(rows) + " has " + std::to_string(width) +
                                " values, expected " + std::to_string(offset),
                            line_no);
            }
            ++rows;
        }
        if (rows != frames) {
            throw Error(ErrorCode::FrameCountMismatch,
                        "declared " + std::to_string(frames) + " frames but found " +
                            std::to_string(rows),
                        lex_.last_line());
        }
    }

    void check_duplicate_names() {
        auto& skel = motion_.skeleton;
        for (std::size_t i = 0; i < skel.joints.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (skel.joints[i].name == skel.joints[j].name) {
                    skel.warnings.push_back("duplicate joint name '" + skel.joints[i].name +
                                            "'; lookups resolve to index " + std::to_string(j));
                    break;
                }
            }
        }
    }

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && Lexer::is_space(s.front())) {
            s.remove_prefix(1);
        }
        while (!s.empty() && Lexer::is_space(s.back())) {
            s.remove_suffix(1);
        }
        return s;
    }

    Lexer lex_;
    Motion motion_;
    int depth_ = 0;
};

void write_joint(std::ostringstream& out, const Skeleton& skel, std::size_t index, int depth) {
    const auto& joint = skel.joints[index];
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    if (joint.is_end_site) {
        out << pad << "End Site\n";
    } else {
        out << pad << (joint.parent ? "JOINT " : "ROOT ") << joint.name << "\n";
    }
    out << pad << "{\n";
    out << pad << "  OFFSET " << format_shortest(joint.offset.x) << ' '
        << format_shortest(joint.offset.y) << ' ' << format_shortest(joint.offset.z) << "\n";
    if (!joint.is_end_site) {
        out << pad << "  CHANNELS " << joint.channels.size();
        for (auto c : joint.channels) {
            out << ' ' << channel_name(c);
        }
        out << "\n";
    }
    for (std::size_t i = index + 1; i < skel.joints.size(); ++i) {
        if (skel.joints[i].parent == index) {
            write_joint(out, skel, i, depth + 1);
        }
    }
    out << pad << "}\n";
}

/// Decoded local transform of every joint at one frame.
void decode_frame(const Skeleton& skel, const AnimationClip& clip, std::size_t frame,
                  std::vector<Pose>& out) {
    out.resize(skel.joints.size());
    for (std::size_t j = 0; j < skel.joints.size(); ++j) {
        out[j] = local_pose(skel, clip, j, frame);
    }
}

bool has_position_channels(const Joint& joint) {
    return std::any_of(joint.channels.begin(), joint.channels.end(),
                       [](Channel c) { return !is_rotation(c); });
}

}  // namespace

Motion parse_bvh(std::string_view text, double unit_scale) {
    if (!(unit_scale > 0.0) || !std::isfinite(unit_scale)) {
        throw Error(ErrorCode::InvalidArgument, "unit_scale must be a positive finite number");
    }
    return BvhParser(text, unit_scale).parse();
}

std::string write_hierarchy(const Skeleton& skeleton) {
    std::ostringstream out;
    out << "HIERARCHY\n";
    if (!skeleton.joints.empty()) {
        write_joint(out, skeleton, 0, 0);
    }
    return out.str();
}

Pose local_pose(const Skeleton& skeleton, const AnimationClip& clip, std::size_t joint,
                std::size_t frame) {
    if (joint >= skeleton.joints.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "joint index " + std::to_string(joint) +
                                                    " out of range");
    }
    if (frame >= clip.frame_count()) {
        throw Error(ErrorCode::IndexOutOfRange, "frame index " + std::to_string(frame) +
                                                    " out of range");
    }
    const Joint& j = skeleton.joints[joint];
    const double scale = skeleton.unit_scale;
    const double* row = clip.frame(frame) + j.channel_offset;

    Vec3 translation;
    UnitQuat rotation;
    for (std::size_t c = 0; c < j.channels.size(); ++c) {
        const double v = row[c];
        switch (j.channels[c]) {
            case Channel::Xposition: translation.x += v; break;
            case Channel::Yposition: translation.y += v; break;
            case Channel::Zposition: translation.z += v; break;
            case Channel::Xrotation: rotation = rotation * axis_rotation(Axis::X, v); break;
            case Channel::Yrotation: rotation = rotation * axis_rotation(Axis::Y, v); break;
            case Channel::Zrotation: rotation = rotation * axis_rotation(Axis::Z, v); break;
        }
    }
    return {(j.offset + translation) * scale, rotation};
}

PoseSet forward_kinematics(const Skeleton& skeleton, const std::vector<Pose>& locals) {
    if (locals.size() != skeleton.joints.size()) {
        throw Error(ErrorCode::InvalidArgument, "forward_kinematics needs one local pose per joint");
    }
    PoseSet out;
    out.world.resize(locals.size());
    for (std::size_t i = 0; i < locals.size(); ++i) {
        const auto& parent = skeleton.joints[i].parent;
        out.world[i] = parent ? compose(out.world[*parent], locals[i]) : locals[i];
    }
    return out;
}

PoseSet sample_pose(const Skeleton& skeleton, const AnimationClip& clip, double t) {
    const std::size_t frames = clip.frame_count();
    const double duration = clip.duration();
    if (frames == 0) {
        throw Error(ErrorCode::InvalidArgument, "clip has no frames");
    }
    if (!(t >= 0.0) || t > duration + 1e-9) {
        throw Error(ErrorCode::TimeOutOfRange, "time " + format_shortest(t) +
                                                   " s outside [0, " + format_shortest(duration) +
                                                   "]");
    }

    std::vector<Pose> locals;
    const double u = frames == 1 ? 0.0 : std::min(t, duration) / clip.frame_time;
    const double nearest = std::round(u);
    if (frames == 1 || std::abs(u - nearest) < 1e-9) {
        const auto k = std::min(static_cast<std::size_t>(nearest), frames - 1);
        decode_frame(skeleton, clip, k, locals);
        PoseSet out = forward_kinematics(skeleton, locals);
        out.time = t;
        return out;
    }

    std::size_t k = static_cast<std::size_t>(std::floor(u));
    k = std::min(k, frames - 2);
    const double s = u - static_cast<double>(k);
    const std::size_t k_prev = k == 0 ? 0 : k - 1;
    const std::size_t k_next = k + 1;
    const std::size_t k_next2 = std::min(k + 2, frames - 1);

    locals.resize(skeleton.joints.size());
    for (std::size_t j = 0; j < skeleton.joints.size(); ++j) {
        const Pose a = local_pose(skeleton, clip, j, k);
        const Pose b = local_pose(skeleton, clip, j, k_next);
        Vec3 position = a.position;
        if (has_position_channels(skeleton.joints[j])) {
            position = catmull_rom(local_pose(skeleton, clip, j, k_prev).position, a.position,
                                   b.position, local_pose(skeleton, clip, j, k_next2).position, s);
        }
        locals[j] = {position, slerp(a.orientation, b.orientation, s)};
    }
    PoseSet out = forward_kinematics(skeleton, locals);
    out.time = t;
    return out;
}

}  // namespace vsens::mocap
