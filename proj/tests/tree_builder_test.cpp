// Copyright (C) 2026 The catsynth Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <functional>

#include "catsynth/error.hpp"
#include "catsynth/mock_backends.hpp"
#include "catsynth/tree_builder.hpp"
#include "scripted.hpp"

namespace catsynth {
namespace {

using testing::dog_tree;
using testing::tree_reply;

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Io;
}

std::vector<ImageRef> fake_images(int n) {
    std::vector<ImageRef> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({"0" + std::to_string(i) + "/img" + std::to_string(i) + ".png", 32, 32, "rgb8"});
    }
    return out;
}

std::string vote(const std::string& dim, const std::string& attr) {
    return "```json\n{\"" + dim + "\": \"" + attr + "\"}\n```";
}

TEST(TreeBuilder, ParseDescription) {
    auto c = parse_description("Class: Golden Retriever\nA dog on a lawn.");
    EXPECT_EQ(c.class_name, "golden retriever");
    EXPECT_EQ(c.text, "A dog on a lawn.");
    c = parse_description("A dog on a lawn.\n**Class name**: dog");
    EXPECT_EQ(c.class_name, "dog");
    EXPECT_EQ(c.text, "A dog on a lawn.");
    EXPECT_EQ(code_of([] { parse_description("just a dog"); }), ErrorCode::MalformedResponse);
}

TEST(TreeBuilder, ParseTreeReplyShapes) {
    const auto t = dog_tree();
    EXPECT_TRUE(structurally_equal(parse_tree_reply(tree_reply(t)), t));
    const auto bare = parse_tree_reply(R"(Sure: {"root": "cat", "dimensions": {"color": ["black", " white "]}} ok)");
    EXPECT_EQ(bare.root, "cat");
    ASSERT_EQ(bare.dimensions.size(), 1u);
    EXPECT_EQ(bare.dimensions[0].attributes, (std::vector<std::string>{"black", "white"}));
    EXPECT_EQ(code_of([] { parse_tree_reply("```json\n{\"root\": 3}\n```"); }), ErrorCode::MalformedResponse);
}

TEST(TreeBuilder, FencedBlocks) {
    const auto blocks = fenced_blocks("a\n```json\n{1}\n```\nb\n```\nx\n```");
    ASSERT_EQ(blocks.size(), 2u);
    EXPECT_EQ(blocks[0], "{1}\n");
    EXPECT_EQ(blocks[1], "x\n");
}

TEST(TreeBuilder, ParseFeedback) {
    auto fb = parse_feedback(R"(I think {"hallucination": []} applies.)");
    EXPECT_EQ(fb.kind, FeedbackKind::Hallucination);
    EXPECT_FALSE(fb.proposed);

    fb = parse_feedback("{\"missing\": [\"at night\"]}\n" + tree_reply(dog_tree()));
    EXPECT_EQ(fb.kind, FeedbackKind::Missing);
    EXPECT_EQ(fb.keywords, std::vector<std::string>{"at night"});
    ASSERT_TRUE(fb.proposed);
    EXPECT_EQ(fb.proposed->root, "dog");

    EXPECT_EQ(code_of([] { parse_feedback(R"({"missing": ["a", "b"]})"); }), ErrorCode::MalformedResponse);
    EXPECT_EQ(code_of([] { parse_feedback(R"({"redundant": []})"); }), ErrorCode::MalformedResponse);
    EXPECT_EQ(code_of([] { parse_feedback("nothing here"); }), ErrorCode::MalformedResponse);
}

TEST(TreeBuilder, ClassifyCaptionQuorumAndSplits) {
    const auto t = dog_tree();
    MockFixtures fx;
    fx.add(vote_request(t, "cap", 1), {"```json\n{\"behavior\": \"running\", \"location\": \"on grass\"}\n```"});
    fx.add(vote_request(t, "cap", 2), {"{\"Behavior\": \"SLEEPING\", \"location\": \"on grass\"}"});
    fx.add(vote_request(t, "cap", 3), {"```json\n{\"behavior\": \"running\", \"location\": \"nowhere\"}\n```"});
    MockChat chat(fx);
    const auto v = classify_caption(t, "cap", chat, 3, 2);
    ASSERT_EQ(v.rounds.size(), 3u);
    EXPECT_EQ(v.rounds[1].at("behavior"), "sleeping");
    EXPECT_EQ(v.rounds[2].at("location"), "");
    EXPECT_EQ(v.winners.at("behavior"), "running");
    EXPECT_EQ(v.winners.at("location"), "on grass");
    EXPECT_EQ(v.split_dimensions, std::vector<std::string>{"behavior"});
    // lighting was never voted for
    EXPECT_FALSE(v.consensus);
}

TEST(TreeBuilder, MissingKeywordGoesToProposedHomeOrOther) {
    const auto t = dog_tree();
    RefineFeedback fb{FeedbackKind::Missing, {"at night"}, std::nullopt};
    auto edits = edits_for_feedback(t, fb, {});
    ASSERT_EQ(edits.size(), 1u);
    EXPECT_EQ(edits[0], TreeEdit::add({"other", {"at night"}}));

    auto proposed = t;
    proposed.dimensions[2].attributes.push_back("at night");
    fb.proposed = proposed;
    edits = edits_for_feedback(t, fb, {});
    ASSERT_EQ(edits.size(), 1u);
    EXPECT_EQ(edits[0], TreeEdit::modify("lighting", {"lighting", {"at sunset", "at noon", "at night"}}));

    fb.keywords = {"At Noon"};
    EXPECT_TRUE(edits_for_feedback(t, fb, {}).empty());
    EXPECT_TRUE(edits_for_feedback(t, {FeedbackKind::Hallucination, {}, std::nullopt}, {}).empty());
}

TEST(TreeBuilder, RedundantFoldsTheSplitAttributes) {
    const auto t = dog_tree();
    VoteResult v;
    v.rounds = {{{"behavior", "running"}}, {{"behavior", "jumping"}}, {{"behavior", ""}}};
    v.split_dimensions = {"behavior"};
    const auto edits = edits_for_feedback(t, {FeedbackKind::Redundant, {"active"}, std::nullopt}, v);
    ASSERT_EQ(edits.size(), 1u);
    EXPECT_EQ(edits[0], TreeEdit::modify("behavior", {"behavior", {"active", "sleeping"}}));
}

TEST(TreeBuilder, RefineFoldsThenConverges) {
    ConceptTree t{"c", "dog", {{"behavior", {"running", "sleeping"}}}, Provenance::LlmBuilt, 0};
    ConceptTree folded{"c", "dog", {{"behavior", {"active"}}}, Provenance::LlmBuilt, 0};
    CaptionSet caps{"c", {Caption{{}, "a dog", "dog"}}, "dog"};
    MockFixtures fx;
    fx.add(vote_request(t, "a dog", 1), {vote("behavior", "running")});
    fx.add(vote_request(t, "a dog", 2), {vote("behavior", "sleeping")});
    fx.add(vote_request(t, "a dog", 3), {vote("behavior", "none")});
    fx.add(feedback_request(t, "a dog"), {R"({"redundant": ["active"]})"});
    for (int r = 1; r <= 3; ++r) {
        fx.add(vote_request(folded, "a dog", r), {vote("behavior", "active")});
    }
    MockChat chat(fx);
    const auto out = refine(t, caps, chat);
    EXPECT_TRUE(out.converged);
    EXPECT_EQ(out.iterations, 1);
    EXPECT_EQ(out.tree, folded);
    ASSERT_EQ(out.feedback.size(), 1u);
    EXPECT_EQ(out.feedback[0].kind, FeedbackKind::Redundant);
}

TEST(TreeBuilder, RefineStopsAtIterationCap) {
    ConceptTree t{"c", "dog", {{"behavior", {"running", "sleeping"}}}, Provenance::LlmBuilt, 0};
    CaptionSet caps{"c", {Caption{{}, "a dog", "dog"}}, "dog"};
    MockFixtures fx;
    for (int r = 1; r <= 3; ++r) {
        fx.add(vote_request(t, "a dog", r), {"no idea"});
    }
    fx.add(feedback_request(t, "a dog"), {R"({"hallucination": []})"});
    MockChat chat(fx);
    BuilderConfig cfg;
    cfg.refine_max_iters = 2;
    const auto out = refine(t, caps, chat, cfg);
    EXPECT_FALSE(out.converged);
    EXPECT_EQ(out.iterations, 2);
    EXPECT_EQ(out.tree, t);
}

TEST(TreeBuilder, BuildTreeFromScriptedReplies) {
    const auto images = fake_images(3);
    MockFixtures fx;
    testing::script_build(fx, images, dog_tree());
    MockChat chat(fx);
    const auto result = build_tree(images, chat, chat);
    EXPECT_TRUE(structurally_equal(result.tree, dog_tree()));
    EXPECT_EQ(result.tree.provenance, Provenance::LlmBuilt);
    EXPECT_EQ(result.captions.class_name, "dog");
    EXPECT_EQ(result.stages, (std::vector<std::string>{"describe_images", "summarize_batch", "refine"}));
}

TEST(TreeBuilder, DescriptionResendsThenGivesUp) {
    const auto images = fake_images(1);
    MockFixtures fx;
    fx.add(description_request(images[0]), {"no class here", "class: dog\nA dog."});
    MockChat chat(fx);
    const auto set = describe_images(images, chat);
    EXPECT_EQ(set.captions[0].class_name, "dog");
    EXPECT_EQ(chat.calls(), 2u);

    MockFixtures bad;
    bad.add(description_request(images[0]), {"no class here"});
    MockChat never(bad);
    EXPECT_EQ(code_of([&] { describe_images(images, never); }), ErrorCode::MalformedResponse);
    EXPECT_EQ(never.calls(), 3u);
}

TEST(TreeBuilder, MajorityClassBreaksTiesAlphabetically) {
    const auto images = fake_images(4);
    MockFixtures fx;
    const char* classes[] = {"wolf", "dog", "wolf", "dog"};
    for (int i = 0; i < 4; ++i) {
        fx.add(description_request(images[i]), {std::string("class: ") + classes[i] + "\nx"});
    }
    MockChat chat(fx);
    EXPECT_EQ(describe_images(images, chat).class_name, "dog");
}

TEST(TreeBuilder, SummaryReasksWithReminder) {
    CaptionSet caps{"c", {Caption{{}, "a dog", "dog"}}, "dog"};
    MockFixtures fx;
    fx.add(summarize_request(caps), {"I cannot format that."});
    fx.add(with_reminder(summarize_request(caps)), {tree_reply(dog_tree())});
    MockChat chat(fx);
    const auto t = summarize_batch(caps, chat);
    EXPECT_EQ(t.concept_id, "c");
    EXPECT_EQ(t.dimensions.size(), 3u);
}

TEST(TreeBuilder, EasyNegativeMustChangeClass) {
    const auto t = dog_tree();
    MockFixtures fx;
    testing::script_easy(fx, t);
    MockChat chat(fx);
    const auto easy = derive_easy_negative_tree(t, chat);
    EXPECT_EQ(easy.root, "cat");
    EXPECT_EQ(easy.provenance, Provenance::DerivedEasyNegative);
    EXPECT_EQ(easy.concept_id, "concept/easy");

    MockFixtures same;
    same.add(easy_negative_request(t), {tree_reply(t)});
    same.add(with_reminder(easy_negative_request(t)), {tree_reply(t)});
    MockChat stubborn(same);
    EXPECT_EQ(code_of([&] { derive_easy_negative_tree(t, stubborn); }), ErrorCode::SameClassReturned);
    // one original request plus one re-ask
    EXPECT_EQ(stubborn.calls(), 2u);
}

TEST(TreeBuilder, EditTreeLlm) {
    const auto t = dog_tree();
    MockFixtures fx;
    testing::script_edit(fx, t, EditKind::Modify, 1);
    MockChat chat(fx);
    const auto out = edit_tree_llm(t, EditKind::Modify, 1, chat);
    EXPECT_EQ(out.tree.concept_id, "concept/modify1");
    EXPECT_EQ(out.tree.provenance, Provenance::DerivedEdit);
    EXPECT_EQ(out.tree.edit_count, 1u);
    EXPECT_EQ(out.tree.root, "dog");
    EXPECT_EQ(out.tree.dimensions[0].name, "weather");
}

TEST(TreeBuilder, EditTreeCountMismatchAndTooManyRemovals) {
    const auto t = dog_tree();
    MockFixtures fx;
    // asked to add two, reply adds one
    const std::string short_reply = tree_reply(testing::scripted_edit(t, EditKind::Add, 1));
    fx.add(edit_request(t, EditKind::Add, 2), {short_reply});
    fx.add(with_reminder(edit_request(t, EditKind::Add, 2)), {short_reply});
    MockChat chat(fx);
    EXPECT_EQ(code_of([&] { edit_tree_llm(t, EditKind::Add, 2, chat); }), ErrorCode::EditCountMismatch);
    EXPECT_EQ(code_of([&] { edit_tree_llm(t, EditKind::Remove, 3, chat); }), ErrorCode::EmptyTree);
}

TEST(TreeBuilder, DiffDimensions) {
    auto after = dog_tree();
    after.dimensions[0].attributes.pop_back();
    after.dimensions.pop_back();
    after.dimensions.push_back({"weather", {"rain"}});
    const auto d = diff_dimensions(dog_tree(), after);
    EXPECT_EQ(d.removed, std::vector<std::string>{"lighting"});
    EXPECT_EQ(d.changed, std::vector<std::string>{"behavior"});
    ASSERT_EQ(d.added.size(), 1u);
    EXPECT_EQ(d.added[0].name, "weather");
}

} // namespace
} // namespace catsynth
