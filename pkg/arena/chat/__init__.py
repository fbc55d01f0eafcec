from arena.chat.pool import ChatMessage, ChatPool, fetch, post

__all__ = ["ChatMessage", "ChatPool", "fetch", "post"]
