"""
Stream per-frame predictions for a landmark file.

Usage:
    python manage.py predict --model model.lfat --input frames.jsonl --out predictions.jsonl
"""

from rest_framework.renderers import JSONRenderer  # type: ignore

from fatigue.checkpoint import checkpoint_load
from fatigue.embed import SyntheticEmbeddingProvider, build_provider, load_embedding_file
from fatigue.errors import FormatError, InputError
from fatigue.ingest import iter_landmark_stream
from fatigue.serializers import PredictionRecordSerializer
from fatigue.streaming import StreamingPredictor

from ._base import LiteFatCommand


class Command(LiteFatCommand):
    help = 'Write one prediction record (probabilities, label, warning) per input frame.'

    def add_arguments(self, parser):
        parser.add_argument('--model', required=True, metavar='CKPT', help='Trained checkpoint.')
        parser.add_argument('--input', required=True, metavar='FILE', help='Landmark JSONL stream.')
        parser.add_argument('--out', required=True, metavar='FILE', help='Prediction JSONL to write.')
        parser.add_argument('--embeddings', metavar='FILE',
                            help="Embedding JSONL for the input frames (default: the checkpoint's provider).")

    def provider_for(self, run, embeddings_path):
        dim = run.model.D
        if embeddings_path:
            provider = load_embedding_file(embeddings_path)
            if provider.dim != dim:
                raise FormatError(f'{embeddings_path}: embeddings have D={provider.dim}, the model expects D={dim}')
            return provider
        if run.embedding.kind == 'file' and not run.embedding.path:
            # no dataset directory to look in
            return SyntheticEmbeddingProvider(dim, run.embedding.seed)
        try:
            return build_provider(run.embedding, dim)
        except InputError:
            return SyntheticEmbeddingProvider(dim, run.embedding.seed)

    def handle(self, *args, **options):
        params, run = checkpoint_load(options['model'])
        predictor = StreamingPredictor(params, run, self.provider_for(run, options['embeddings']))
        renderer = JSONRenderer()
        count = 0
        with open(options['input'], encoding='utf-8') as source, \
                open(options['out'], 'w', encoding='utf-8') as sink:
            frames = (frame for _, frame in iter_landmark_stream(source))
            for record in predictor.run(frames):
                sink.write(renderer.render(PredictionRecordSerializer(record).data).decode('utf-8'))
                sink.write('\n')
                count += 1
        self.stdout.write(f"predicted {count} frames into {options['out']}")
