from .svg import emit_plot, render_plot
from .tables import CsvSchema, load_csv, load_text_csv, train_eval_split, write_csv
from .text import TfidfSpec, TfidfVectorizer, apply_tfidf, english_stopwords, fit_tfidf

__all__ = [
    "CsvSchema",
    "TfidfSpec",
    "TfidfVectorizer",
    "apply_tfidf",
    "emit_plot",
    "english_stopwords",
    "fit_tfidf",
    "load_csv",
    "load_text_csv",
    "render_plot",
    "train_eval_split",
    "write_csv",
]
