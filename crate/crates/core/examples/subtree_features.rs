//! Complete and incomplete subtrees, node counts and their hashed encodings.

use parsebrain::features::{
    complete_subtree, encode_subtree, incomplete_subtree, node_count, SubtreeEncodingConfig, SubtreeView,
};
use parsebrain::treebank::ConstituencyTree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = ConstituencyTree::parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBD saw) (NP (DT a) (NN cat))) (. .))")?;
    let enc = SubtreeEncodingConfig { dim: 16, ..SubtreeEncodingConfig::default() };
    for (k, w) in t.words().iter().enumerate() {
        let cc = complete_subtree(&t, k);
        let ci = incomplete_subtree(&t, k, None);
        println!("{k} {w:<4} NC={} CC={}", node_count(&t, k), t.node(cc).label);
        println!("    CI items: {:?}", ci.items().collect::<Vec<_>>());
        let v = encode_subtree(&SubtreeView::complete(&t, cc, None), &enc);
        println!("    CC vector: {v:?}");
    }
    Ok(())
}
