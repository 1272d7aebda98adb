#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "motionloc/image.hpp"

namespace motionloc {

/// A labeled object position in continuous pixel units (pixel i has center i).
struct Annotation {
    double x = 0.0;  ///< column
    double y = 0.0;  ///< row
    bool visible = true;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// Labeled frames of one video, keyed by 0-based frame index.
struct AnnotationSet {
    Shape resolution;  ///< image size the coordinates refer to
    std::map<int, Annotation> entries;

    /// Same labels expressed for frames of size `target`.
    AnnotationSet rescaled(Shape target) const;

    friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

class AnnotationError : public std::runtime_error {
public:
    AnnotationError(const std::string& what, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Writes `frame,x,y,visible` CSV with a `# resolution=WxH` comment.
void save_annotations(const AnnotationSet& set, const std::filesystem::path& path);

/// Reads the CSV written by save_annotations(). When `target` is given the
/// coordinates are rescaled from the recorded resolution to it.
AnnotationSet load_annotations(const std::filesystem::path& path, std::optional<Shape> target = std::nullopt);

}  // namespace motionloc
