#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "deocc/cli.hpp"
#include "deocc/io.hpp"
#include "deocc/losses.hpp"
#include "deocc/maskops.hpp"
#include "support.hpp"

using namespace deocc;
using deocc::testing::run_cli_binary;
using deocc::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_in_process(const std::vector<std::string>& args, std::string& out, std::string& err) {
    std::vector<const char*> argv{"deocc"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream o;
    std::ostringstream e;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
    out = o.str();
    err = e.str();
    return code;
}

}  // namespace

TEST(CliTest, ToymodelIsReproducible) {
    TempDir dir("cli");
    const std::string a = (dir / "a.dmm").string();
    const std::string b = (dir / "b.dmm").string();
    ASSERT_EQ(run_cli_binary("toymodel --seed 7 --out " + a), 0);
    ASSERT_EQ(run_cli_binary("toymodel --seed 7 --out " + b), 0);
    EXPECT_TRUE(deocc::testing::same_bytes(a, b));
    EXPECT_EQ(load_model(a).vertex_count, toy_model(16, 7).vertex_count);
}

TEST(CliTest, MaskopsMatchesLibrary) {
    TempDir dir("cli");
    Rng rng(1);
    const MaskF mm = deocc::testing::random_mask(rng, 12, 10);
    const MaskF mf = deocc::testing::random_mask(rng, 12, 10);
    save_mask_png(mm, dir / "a.png");
    save_mask_png(mf, dir / "b.png");
    ASSERT_EQ(run_cli_binary("maskops occlusion --mm " + (dir / "a.png").string() + " --mf " +
                             (dir / "b.png").string() + " --out " + (dir / "o.png").string()),
              0);
    EXPECT_EQ(load_mask_png(dir / "o.png"), occlusion_mask(mm, mf));
    ASSERT_EQ(run_cli_binary("maskops overlap --mm " + (dir / "a.png").string() + " --mf " + (dir / "b.png").string(),
                             dir / "rate.txt"),
              0);
    EXPECT_NEAR(std::stod(slurp(dir / "rate.txt")), overlap_rate(mm, mf), 1e-12);
}

TEST(CliTest, UnknownFlagIsAUsageError) {
    TempDir dir("cli");
    EXPECT_EQ(run_cli_binary("toymodel --bogus 1 --out x.dmm", dir / "out.txt", dir / "err.txt"), 2);
    const std::string err = slurp(dir / "err.txt");
    EXPECT_NE(err.find("--bogus"), std::string::npos);
    EXPECT_NE(err.find("Usage"), std::string::npos);
    EXPECT_TRUE(slurp(dir / "out.txt").empty());
}

TEST(CliTest, MissingSubcommandOrInputIsAUsageError) {
    std::string out;
    std::string err;
    EXPECT_EQ(run_in_process({}, out, err), 2);
    EXPECT_EQ(run_in_process({"noise", "--image", "/nonexistent.png", "--mask", "/nonexistent.png", "--out", "x.png"},
                             out, err),
              2);
    EXPECT_TRUE(out.empty());
}

TEST(CliTest, ContractViolationExitsOne) {
    TempDir dir("cli");
    save_png(ImageF(8, 8, 3, 0.5), dir / "i.png");
    save_mask_png(MaskF(8, 8, 1.0), dir / "f.png");
    save_mask_png(MaskF(8, 8, 0.0), dir / "m.png");
    std::string out;
    std::string err;
    const int code = run_in_process(
        {"inpaint", "--image", (dir / "i.png").string(), "--face-mask", (dir / "f.png").string(), "--render",
         (dir / "i.png").string(), "--render-mask", (dir / "m.png").string(), "--out-dir", (dir / "o").string()},
        out, err);
    EXPECT_EQ(code, 1);
    EXPECT_NE(err.find("render mask is empty"), std::string::npos);
}

TEST(CliTest, HelpListsDefaults) {
    std::string out;
    std::string err;
    ASSERT_EQ(run_in_process({"inpaint", "--help"}, out, err), 0);
    for (const char* needle : {"--iters", "500", "0.01", "0.999", "--lambda-pix", "10", "0.25"}) {
        EXPECT_NE(out.find(needle), std::string::npos) << needle;
    }
    ASSERT_EQ(run_in_process({"blend", "--help"}, out, err), 0);
    EXPECT_NE(out.find("1e-08"), std::string::npos);
}

TEST(CliTest, NoiseAndLossAndMetricsRun) {
    TempDir dir("cli");
    Rng rng(2);
    const ImageF image = deocc::testing::random_image(rng, 16, 16, 3);
    const MaskF mask = deocc::testing::random_mask(rng, 16, 16);
    save_png(image, dir / "i.png");
    write_tensor(image, dir / "i.dtn");
    save_mask_png(mask, dir / "m.png");
    ASSERT_EQ(run_cli_binary("noise --image " + (dir / "i.dtn").string() + " --mask " + (dir / "m.png").string() +
                             " --seed 4 --out " + (dir / "n.dtn").string()),
              0);
    EXPECT_EQ(read_image_tensor(dir / "n.dtn"), to_image(to_tensor(gaussian_noise_fill(image, mask, {0.5, 0.2, 4}))));

    std::string out;
    std::string err;
    ASSERT_EQ(
        run_in_process({"loss", "tv", "--input", (dir / "i.dtn").string(), "--out-grad", (dir / "g.dtn").string()}, out,
                       err),
        0);
    const ImageF stored = read_image_tensor(dir / "i.dtn");
    EXPECT_NEAR(std::stod(out), tv_loss(stored).value, 1e-12);
    EXPECT_EQ(read_image_tensor(dir / "g.dtn").height(), 16u);

    ASSERT_EQ(run_in_process({"metrics", "--header", "--result", (dir / "i.dtn").string(), "--truth",
                              (dir / "i.dtn").string(), "--region", (dir / "m.png").string()},
                             out, err),
              0);
    EXPECT_EQ(out, "Method\tL1\tSSIM\tPSNR\tID\nOurs\t0.000\t1.000\t99.000\t1.000\n");
}

TEST(CliTest, RenderWritesEveryOutput) {
    TempDir dir("cli");
    std::string out;
    std::string err;
    ASSERT_EQ(run_in_process({"render", "--width", "64", "--height", "64", "--out-image", (dir / "i.png").string(),
                              "--out-mask", (dir / "m.png").string(), "--out-depth", (dir / "d.dtn").string(),
                              "--out-landmarks", (dir / "l.json").string()},
                             out, err),
              0)
        << err;
    const MaskF mask = load_mask_png(dir / "m.png");
    EXPECT_GT(mask.count_nonzero(), 0u);
    const Tensor depth = read_tensor(dir / "d.dtn");
    EXPECT_EQ(depth.height, 64u);
    const std::string landmarks = slurp(dir / "l.json");
    EXPECT_EQ(std::count(landmarks.begin(), landmarks.end(), '['), 69);
}

TEST(CliTest, GradcheckReportsATable) {
    std::string out;
    std::string err;
    ASSERT_EQ(run_in_process({"gradcheck", "--size", "16", "--probes", "20"}, out, err), 0) << out;
    EXPECT_NE(out.find("generator_objective"), std::string::npos);
}
