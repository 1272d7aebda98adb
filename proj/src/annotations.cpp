#include "motionloc/annotations.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace motionloc {

namespace {

constexpr std::string_view kHeader = "frame,x,y,visible";

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_number(std::string_view field, const char* name, int line) {
    field = trim(field);
    T value{};
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw AnnotationError("cannot parse " + std::string(name) + " '" + std::string(field) + "'", line);
    return value;
}

bool in_bounds(double v, int extent) { return v >= -0.5 && v <= extent - 0.5; }

}  // namespace

AnnotationSet AnnotationSet::rescaled(Shape target) const {
    if (resolution.height <= 0 || resolution.width <= 0 || resolution == target) {
        AnnotationSet copy = *this;
        copy.resolution = target;
        return copy;
    }
    AnnotationSet out;
    out.resolution = target;
    const double sx = static_cast<double>(target.width) / resolution.width;
    const double sy = static_cast<double>(target.height) / resolution.height;
    for (const auto& [frame, a] : entries)
        out.entries[frame] = {(a.x + 0.5) * sx - 0.5, (a.y + 0.5) * sy - 0.5, a.visible};
    return out;
}

void save_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw AnnotationError("cannot open '" + path.string() + "' for writing", 0);
    if (set.resolution.width > 0 && set.resolution.height > 0)
        out << "# resolution=" << set.resolution.width << "x" << set.resolution.height << "\n";
    out << kHeader << "\n";
    for (const auto& [frame, a] : set.entries)
        out << frame << "," << format_double(a.x) << "," << format_double(a.y) << "," << (a.visible ? 1 : 0) << "\n";
    if (!out) throw AnnotationError("failed writing '" + path.string() + "'", 0);
}

AnnotationSet load_annotations(const std::filesystem::path& path, std::optional<Shape> target) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw AnnotationError("cannot open annotation file '" + path.string() + "'", 0);

    AnnotationSet set;
    set.resolution = {0, 0};
    std::string raw;
    int line = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = trim(raw);
        if (line == 1 && text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
        if (text.empty()) continue;
        if (text.front() == '#') {
            text.remove_prefix(1);
            text = trim(text);
            if (text.starts_with("resolution=")) {
                text.remove_prefix(11);
                const auto x = text.find('x');
                if (x == std::string_view::npos) throw AnnotationError("malformed resolution comment", line);
                set.resolution.width = parse_number<int>(text.substr(0, x), "resolution width", line);
                set.resolution.height = parse_number<int>(text.substr(x + 1), "resolution height", line);
                if (set.resolution.width <= 0 || set.resolution.height <= 0)
                    throw AnnotationError("resolution must be positive", line);
            }
            continue;
        }
        if (!header_seen) {
            if (text != kHeader) throw AnnotationError("expected header '" + std::string(kHeader) + "'", line);
            header_seen = true;
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = text.find(',', start);
            fields.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 4)
            throw AnnotationError("expected 4 fields, found " + std::to_string(fields.size()), line);
        const int frame = parse_number<int>(fields[0], "frame", line);
        if (frame < 0) throw AnnotationError("negative frame index", line);
        Annotation a;
        a.x = parse_number<double>(fields[1], "x", line);
        a.y = parse_number<double>(fields[2], "y", line);
        const int visible = parse_number<int>(fields[3], "visible", line);
        if (visible != 0 && visible != 1) throw AnnotationError("visible must be 0 or 1", line);
        a.visible = visible == 1;
        if (a.visible && set.resolution.width > 0) {
            if (!in_bounds(a.x, set.resolution.width))
                throw AnnotationError("x=" + std::string(trim(fields[1])) + " lies outside the image width", line);
            if (!in_bounds(a.y, set.resolution.height))
                throw AnnotationError("y=" + std::string(trim(fields[2])) + " lies outside the image height", line);
        }
        if (!set.entries.emplace(frame, a).second) throw AnnotationError("duplicate frame index", line);
    }
    if (!header_seen) throw AnnotationError("annotation file '" + path.string() + "' has no header", 0);
    return target ? set.rescaled(*target) : set;
}

}  // namespace motionloc
