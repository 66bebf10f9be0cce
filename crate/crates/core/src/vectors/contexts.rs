use super::{ContextAspect, Role, TargetKey};
use crate::corpus::{compound_at, compound_positions, lemmatise_head, ContextVocabulary, NgramRecord, Pos};

/// One weighted (target, context column) co-occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextHit {
    pub target: TargetKey,
    pub column: usize,
    pub weight: u64,
}

/// Co-occurrences contributed by a single 5-gram.
///
/// The window of a target is every other in-vocabulary token of the 5-gram.
/// Compound bigrams are targets under both aspects. Under
/// [`ContextAspect::CompoundCentric`] the two constituents of each detected
/// compound become head/modifier targets and neither sees its partner as a
/// context; under [`ContextAspect::CompoundAgnostic`] every noun token is a
/// standalone-word target and compound partners are ordinary contexts.
pub fn collect_contexts(
    record: &NgramRecord,
    vocab: &ContextVocabulary,
    aspect: ContextAspect,
) -> Vec<ContextHit> {
    let columns: Vec<Option<usize>> = record
        .tokens
        .iter()
        .map(|t| {
            if t.is_alphabetic() {
                vocab.column_of_surface(&t.surface)
            } else {
                None
            }
        })
        .collect();
    let weight = record.match_count;
    let mut hits = Vec::new();
    let mut emit = |target: &TargetKey, skip: &[usize]| {
        for (j, col) in columns.iter().enumerate() {
            if let Some(column) = *col {
                if !skip.contains(&j) {
                    hits.push(ContextHit {
                        target: target.clone(),
                        column,
                        weight,
                    });
                }
            }
        }
    };

    for i in compound_positions(record) {
        let compound = compound_at(record, i);
        let skip = [i, i + 1];
        emit(&TargetKey::new(compound.bigram(), Role::CompoundBigram), &skip);
        if aspect == ContextAspect::CompoundCentric {
            emit(&TargetKey::new(compound.modifier, Role::ModifierOfCompound), &skip);
            emit(&TargetKey::new(compound.head, Role::HeadOfCompound), &skip);
        }
    }

    if aspect == ContextAspect::CompoundAgnostic {
        for (i, tok) in record.tokens.iter().enumerate() {
            if tok.pos == Pos::Noun && tok.is_alphabetic() {
                let key = TargetKey::new(lemmatise_head(&tok.surface), Role::StandaloneWord);
                emit(&key, &[i]);
            }
        }
    }
    hits
}
