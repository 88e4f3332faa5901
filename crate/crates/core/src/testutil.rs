use crate::conllu::{Sentence, Token, EMPTY};

/// Sentence with one token per tag: token 1 is the root, the rest attach to it.
pub(crate) fn sentence_from_pos(sent_id: &str, tags: &[&str]) -> Sentence {
    let tokens = tags
        .iter()
        .enumerate()
        .map(|(i, tag)| Token {
            id: i + 1,
            form: format!("w{}", i + 1),
            lemma: format!("w{}", i + 1),
            upos: tag.to_string(),
            xpos: EMPTY.into(),
            feats: Vec::new(),
            head: if i == 0 { 0 } else { 1 },
            deprel: if i == 0 { "root".into() } else { "dep".into() },
            deps: EMPTY.into(),
            misc: EMPTY.into(),
        })
        .collect();
    Sentence {
        sent_id: sent_id.to_string(),
        text: None,
        comments: vec![format!("# sent_id = {sent_id}")],
        tokens,
        mwt_spans: Vec::new(),
        empty_nodes: Vec::new(),
        genre: None,
    }
}
