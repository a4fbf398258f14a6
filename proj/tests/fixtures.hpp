#pragma once

#include <filesystem>

#include "jointdet/datapipe.hpp"
#include "jointdet/synthgen.hpp"

namespace fixture {

/// A small corpus generated once per test process under the build tree.
inline const std::filesystem::path& small_corpus_dir()
{
    static const std::filesystem::path dir = [] {
        const std::filesystem::path root = std::filesystem::path(JOINTDET_TEST_DATA) / "small_corpus";
        std::filesystem::remove_all(root);
        jointdet::CorpusConfig c;
        c.seed = 11;
        c.images = 40;
        c.negative_videos = 2;
        c.negative_frames = 16;
        c.positive_videos = 2;
        c.positive_frames = 20;
        jointdet::gen_corpus(c, root);
        return root;
    }();
    return dir;
}

inline const jointdet::Corpus& small_corpus()
{
    static const jointdet::Corpus corpus = jointdet::load_manifest(small_corpus_dir());
    return corpus;
}

}  // namespace fixture
