from .characterizer import characterize, blocks_to_requests, CharacterizerParams
