"""Taxonomy-aware attribute value extraction from product titles.

The tagger is a BiLSTM-CRF over BIOE tags whose token representations are
conditioned on a hyperbolic embedding of the product category. A second head
predicts the category path so both tasks share one encoder.
"""
from .corpus import ProductRecord, TokenizedText, label_distant, load_products, split_dataset, tokenize
from .crf import crf_neg_log_likelihood, extract_spans, viterbi_decode
from .evaluation import (ProductEvalOutcome, classification_metrics, extraction_metrics,
                         average_precision)
from .model import ModelConfig, TaxonomyTagger, load_config
from .taxonomy import (CategoryEmbeddingTable, TaxonomyTree, hierarchical_targets, load_taxonomy,
                       poincare_distance, train_poincare)
from .training import extract_values, load_trained, train

__version__ = "0.1.0"

__all__ = [
    "CategoryEmbeddingTable", "ModelConfig", "ProductEvalOutcome", "ProductRecord", "TaxonomyTagger",
    "TaxonomyTree", "TokenizedText", "average_precision", "classification_metrics",
    "crf_neg_log_likelihood", "extract_spans", "extract_values", "extraction_metrics",
    "hierarchical_targets", "label_distant", "load_config", "load_products", "load_taxonomy",
    "load_trained", "poincare_distance", "split_dataset", "tokenize", "train", "train_poincare",
    "viterbi_decode",
]
