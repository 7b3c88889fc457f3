"""Build the tiny SigLIP-style test backbone committed under tests/data.

The checkpoint is a real SiglipModel -- just a microscopic, randomly
initialised one -- so the exporter's tests exercise the genuine
processor/model code path offline without downloading anything. Vision and
text widths are deliberately different (24 vs 32) so a Dv/Dt mix-up cannot
cancel out. Seeded throughout; rerunning regenerates the same weights.
"""

import io
from pathlib import Path

import sentencepiece as spm
import torch
from transformers import (
    SiglipConfig,
    SiglipImageProcessor,
    SiglipModel,
    SiglipProcessor,
    SiglipTokenizer,
)

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "tiny-siglip"

LINES = [
    "what is the total amount due on this invoice",
    "the shipment date and order reference number",
    "name of the billing contact for the account",
    "subtotal tax and grand total in dollars",
    "answer: 42.50 [SEP] invoice number 2031",
    "page one of the scanned letter with header",
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)

    sp_bytes = io.BytesIO()
    spm.SentencePieceTrainer.train(
        sentence_iterator=iter(LINES),
        model_writer=sp_bytes,
        vocab_size=96,
        hard_vocab_limit=False,
        model_type="unigram",
        minloglevel=2,
    )
    sp_path = OUT / "spiece.model"
    sp_path.write_bytes(sp_bytes.getvalue())

    tokenizer = SiglipTokenizer(str(sp_path), model_max_length=64)
    config = SiglipConfig(
        text_config=dict(
            hidden_size=32,
            intermediate_size=64,
            num_attention_heads=2,
            num_hidden_layers=2,
            vocab_size=96,
            max_position_embeddings=64,
            bos_token_id=1,
            eos_token_id=2,
            pad_token_id=2,
        ),
        vision_config=dict(
            hidden_size=24,
            intermediate_size=48,
            num_attention_heads=2,
            num_hidden_layers=2,
            image_size=32,
            patch_size=16,
        ),
    )
    torch.manual_seed(11)
    model = SiglipModel(config).eval()
    model.save_pretrained(OUT)

    processor = SiglipProcessor(
        SiglipImageProcessor(size={"height": 32, "width": 32}), tokenizer
    )
    processor.save_pretrained(OUT)

    n_params = sum(p.numel() for p in model.parameters())
    print(f"wrote tiny backbone ({n_params} params, Dv=24, Dt=32) to {OUT}")


if __name__ == "__main__":
    main()
