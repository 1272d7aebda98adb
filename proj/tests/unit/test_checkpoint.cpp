#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "motionloc/checkpoint.hpp"
#include "temp_dir.hpp"

using namespace motionloc;

namespace {

Checkpoint sample_checkpoint() {
    EncoderConfig arch;
    arch.height = 12;
    arch.width = 16;
    arch.blocks = 2;
    arch.channels = 3;
    Checkpoint c;
    c.params = init_params(arch, 77);
    // Awkward float values must survive unchanged.
    c.params.arrays()[0].values[0] = std::numeric_limits<float>::denorm_min();
    c.params.arrays()[0].values[1] = -0.0f;
    c.params.arrays()[0].values[2] = 0.1f;
    c.config.seed = 5;
    c.config.restarts = 2;
    c.config.restart_seeds = {3, std::numeric_limits<std::uint64_t>::max()};
    c.step = 3;
    c.loss_history = {{0.5, 0.25, 0.69314718055994529, 2.1931471805599454},
                      {1.0 / 3.0, 1e-17, 0.1, 0.7666666666666667},
                      {0.1, 0.2, 0.3, 0.6}};
    c.selected_seed = 3;
    c.restarts = {{3, 0.123456789012345678, false}, {std::numeric_limits<std::uint64_t>::max(),
                                                     std::numeric_limits<double>::infinity(), true}};
    return c;
}

std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

CheckpointError::Kind load_error(const std::filesystem::path& p) {
    try {
        load_checkpoint(p);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "load succeeded for " << p;
    return CheckpointError::Kind::io;
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
    TempDir dir;
    const auto c = sample_checkpoint();
    save_checkpoint(c, dir / "a.mlc");
    const auto back = load_checkpoint(dir / "a.mlc");
    EXPECT_EQ(back, c);
    EXPECT_TRUE(std::signbit(back.params.arrays()[0].values[1]));
    save_checkpoint(back, dir / "b.mlc");
    EXPECT_EQ(read_bytes(dir / "a.mlc"), read_bytes(dir / "b.mlc"));
}

TEST(Checkpoint, NoTemporaryLeftBehind) {
    TempDir dir;
    save_checkpoint(sample_checkpoint(), dir / "a.mlc");
    EXPECT_FALSE(std::filesystem::exists(dir / "a.mlc.tmp"));
}

TEST(Checkpoint, EveryTruncationIsCorrupt) {
    TempDir dir;
    save_checkpoint(sample_checkpoint(), dir / "full.mlc");
    const auto bytes = read_bytes(dir / "full.mlc");
    for (std::size_t len = 0; len < bytes.size(); len += 1 + len / 7) {
        write_bytes(dir / "cut.mlc", bytes.substr(0, len));
        EXPECT_EQ(load_error(dir / "cut.mlc"), CheckpointError::Kind::corrupt) << len;
    }
    write_bytes(dir / "long.mlc", bytes + "x");
    EXPECT_EQ(load_error(dir / "long.mlc"), CheckpointError::Kind::corrupt);
}

TEST(Checkpoint, NewerVersionRejected) {
    TempDir dir;
    save_checkpoint(sample_checkpoint(), dir / "a.mlc");
    auto bytes = read_bytes(dir / "a.mlc");
    std::uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 8, 4);
    ASSERT_EQ(version, Checkpoint::kFormatVersion);
    ++version;
    std::memcpy(bytes.data() + 8, &version, 4);
    write_bytes(dir / "v.mlc", bytes);
    EXPECT_EQ(load_error(dir / "v.mlc"), CheckpointError::Kind::version);
}

TEST(Checkpoint, GarbageAndMissingFiles) {
    TempDir dir;
    write_bytes(dir / "g.mlc", std::string(300, '\x5a'));
    EXPECT_EQ(load_error(dir / "g.mlc"), CheckpointError::Kind::corrupt);
    EXPECT_EQ(load_error(dir / "none.mlc"), CheckpointError::Kind::io);
}

TEST(Checkpoint, FlippedHeaderByteDetected) {
    TempDir dir;
    save_checkpoint(sample_checkpoint(), dir / "a.mlc");
    auto bytes = read_bytes(dir / "a.mlc");
    const auto pos = bytes.find("\"channels\"");
    ASSERT_NE(pos, std::string::npos);
    bytes[pos + 1] = 'k';
    write_bytes(dir / "h.mlc", bytes);
    EXPECT_EQ(load_error(dir / "h.mlc"), CheckpointError::Kind::corrupt);
}

TEST(Checkpoint, UnwritableTarget) {
    TempDir dir;
    std::ofstream(dir / "file") << "x";
    EXPECT_THROW(save_checkpoint(sample_checkpoint(), dir / "file" / "a.mlc"), CheckpointError);
    save_checkpoint(sample_checkpoint(), dir / "new" / "a.mlc");
    EXPECT_TRUE(std::filesystem::exists(dir / "new" / "a.mlc"));
}
