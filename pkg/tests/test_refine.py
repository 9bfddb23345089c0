"""Refinement passes: removal, merging, core cleanup and their invariants."""

import pytest

from intentscan.dom import ElementClass, classify, parse_html, tree_equal
from intentscan.refine import (
    DEFAULT_ATTRIBUTE_ALLOWLIST,
    TRUNCATION_MARKER,
    RefinementConfig,
    collect_style_tokens,
    compress_page,
    merge_association_elements,
    refine_core_elements,
    remove_style_elements,
)

from conftest import core_multiset


def find(tree, tag):
    return next(n for n in tree.nodes() if n.tag == tag)


class TestRemoval:
    def test_single_style_element_removed_and_counted(self):
        tree = parse_html("<div><style>.x{color:red}</style><p>keep</p></div>")
        cleaned, removed = remove_style_elements(tree)
        assert removed == 1
        assert all(n.tag != "style" for n in cleaned.nodes())
        assert find(cleaned, "p").children[0].text == "keep"

    def test_nested_style_elements_counted_individually(self):
        tree = parse_html("<div><video><source src='a.mp4'></video><p>x</p></div>")
        _, removed = remove_style_elements(tree)
        assert removed == 2

    def test_presentational_attributes_stripped_everywhere(self):
        tree = parse_html('<div class="a b" style="color:red"><p class="c">x</p></div>')
        cleaned, _ = remove_style_elements(tree)
        assert "class" not in find(cleaned, "div").attributes
        assert "style" not in find(cleaned, "div").attributes
        assert "class" not in find(cleaned, "p").attributes

    def test_style_tokens_collected_before_strip(self):
        tree = parse_html('<div class="a b"><p class="b c">x</p></div>')
        assert collect_style_tokens(tree) == frozenset({"a", "b", "c"})


class TestMerging:
    def test_run_of_three_paragraphs_merges_with_truncation(self):
        a, b, c = ("x" * 40, "y" * 40, "z" * 40)
        tree = parse_html(f"<div><p>{a}</p><p>{b}</p><p>{c}</p></div>")
        merged_tree, merged = merge_association_elements(tree, max_text=60)
        assert merged == 3
        div = find(merged_tree, "div")
        assert len(div.children) == 1
        node = div.children[0]
        assert node.tag == "p"
        joined = " ".join((a, b, c))
        assert node.children[0].text == joined[:60] + TRUNCATION_MARKER

    def test_run_never_crosses_other_classes(self):
        tree = parse_html("<div><p>a</p><form action='/x'></form><p>b</p></div>")
        merged_tree, merged = merge_association_elements(tree)
        assert merged == 0
        div = find(merged_tree, "div")
        assert [c.tag for c in div.children] == ["p", "form", "p"]

    def test_member_with_core_descendant_exempt(self):
        tree = parse_html("<div><p>intro</p><p>see <a href='/d'>docs</a></p></div>")
        merged_tree, merged = merge_association_elements(tree)
        assert merged == 0
        assert find(merged_tree, "a").attributes["href"] == "/d"

    def test_single_short_paragraph_unchanged(self):
        tree = parse_html("<div><p>short <em>rich</em> text</p></div>")
        merged_tree, merged = merge_association_elements(tree)
        assert merged == 0
        assert tree_equal(tree, merged_tree)

    def test_single_long_paragraph_flattened_and_truncated(self):
        long = "word " * 80
        tree = parse_html(f"<div><p>{long}</p></div>")
        merged_tree, _ = merge_association_elements(tree, max_text=100)
        p = find(merged_tree, "p")
        assert len(p.children) == 1
        assert p.children[0].text.endswith(TRUNCATION_MARKER)
        assert len(p.children[0].text) == 101

    def test_heading_between_paragraphs_blocks_run(self):
        tree = parse_html("<div><p>a</p><h2>title</h2><p>b</p></div>")
        merged_tree, merged = merge_association_elements(tree)
        assert merged == 0
        assert [c.tag for c in find(merged_tree, "div").children] == ["p", "h2", "p"]


class TestCoreRefinement:
    def test_allowlist_enforced_inside_core_subtrees(self):
        tree = parse_html(
            '<form action="/go" method="post" data-track="x">'
            '<input name="q" type="text" onfocus="f()" tabindex="3">'
            "</form>"
        )
        refined, core = refine_core_elements(tree)
        form = find(refined, "form")
        assert set(form.attributes) == {"action", "method"}
        field = find(refined, "input")
        assert set(field.attributes) == {"name", "type"}
        assert field.node_id in core

    def test_attributes_outside_core_untouched(self):
        tree = parse_html('<div data-x="1"><p>text content here</p></div>')
        refined, _ = refine_core_elements(tree)
        assert find(refined, "div").attributes == {"data-x": "1"}

    def test_empty_containers_deleted_bottom_up(self):
        tree = parse_html("<div><div><span></span></div><p>keep</p></div>")
        refined, _ = refine_core_elements(tree)
        body = find(refined, "body")
        outer = body.children[0]
        assert [c.tag for c in outer.children] == ["p"]

    def test_container_with_core_descendant_survives(self):
        tree = parse_html("<div><div><input name='q'></div></div>")
        refined, core = refine_core_elements(tree)
        assert find(refined, "input").attributes["name"] == "q"
        assert len(core) == 1

    def test_skeleton_never_deleted(self):
        tree = parse_html("<body></body>")
        refined, _ = refine_core_elements(tree)
        assert [n.tag for n in refined.nodes()] == ["html", "body"]

    def test_core_elements_are_interactive_leaves(self):
        tree = parse_html(
            "<form action='/c' method='post'><fieldset>"
            "<label><input type='checkbox' name='enable'> Enable</label>"
            "<textarea name='comment'></textarea>"
            "<button type='submit' name='send'>Send</button>"
            "</fieldset></form>"
            "<a href='/logout'>Log out</a>"
        )
        refined, core = refine_core_elements(tree)
        tags = sorted(refined.find(i).tag for i in core)
        assert tags == ["a", "button", "input", "textarea"]


class TestCompose:
    def test_compress_reports_all_counters(self):
        tree = parse_html(
            '<div class="wrap"><style>.x{}</style><p>aa</p><p>bb</p>'
            "<form action='/s' method='post'><input name='q'></form></div>"
        )
        page = compress_page(tree)
        assert page.removed_count == 1
        assert page.merged_count == 2
        assert page.style_tokens == frozenset({"wrap"})
        assert [page.tree.find(i).tag for i in page.core_elements] == ["input"]

    def test_default_config_values(self):
        cfg = RefinementConfig()
        assert cfg.max_text == 200
        assert "name" in DEFAULT_ATTRIBUTE_ALLOWLIST
        assert "href" in DEFAULT_ATTRIBUTE_ALLOWLIST


class TestCorpusInvariants:
    def test_idempotent_on_corpus(self, corpus_files):
        for path in corpus_files:
            once = compress_page(parse_html(path.read_text(), str(path)))
            twice = compress_page(once.tree)
            assert tree_equal(once.tree, twice.tree), path.name

    def test_node_count_monotone_on_corpus(self, corpus_files):
        for path in corpus_files:
            tree = parse_html(path.read_text(), str(path))
            page = compress_page(tree)
            assert page.tree.node_count <= tree.node_count, path.name

    def test_core_elements_preserved_on_corpus(self, corpus_files):
        for path in corpus_files:
            tree = parse_html(path.read_text(), str(path))
            page = compress_page(tree)
            assert core_multiset(page.tree) == core_multiset(tree), path.name
